fn main() {
    std::process::exit(wsdaor::cli::run(std::env::args_os()));
}
