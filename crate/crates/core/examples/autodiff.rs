//! Builds a small graph, runs reverse mode and checks it against central
//! differences.

use wsdaor::diffcore::gradcheck::{max_relative_error, numeric_gradient, FD_STEP};
use wsdaor::diffcore::{Graph, Tensor};

fn loss(x: &Tensor, w: &Tensor, b: &Tensor) -> (Graph, wsdaor::diffcore::NodeId, wsdaor::diffcore::NodeId) {
    let mut g = Graph::new();
    let xn = g.leaf(x.clone());
    let wn = g.leaf(w.clone());
    let bn = g.leaf(b.clone());
    let h = g.affine(xn, wn, bn).unwrap();
    let p = g.softmax_rows(h).unwrap();
    let lp = g.log(p);
    let s = g.sum(lp);
    let root = g.scale(s, -1.0);
    (g, wn, root)
}

fn main() -> wsdaor::Result<()> {
    let x = Tensor::from_rows(&[&[0.5, -1.0], &[2.0, 0.25]])?;
    let w = Tensor::from_rows(&[&[0.1, -0.3, 0.2], &[0.7, 0.0, -0.4]])?;
    let b = Tensor::vector(vec![0.0, 0.1, -0.1])?;

    let (mut g, wn, root) = loss(&x, &w, &b);
    g.backward(root)?;
    let analytic = g.grad(wn).clone();
    println!("loss = {:.6}", g.value(root).item());
    println!("dL/dW (reverse mode) = {analytic:?}");

    let numeric = numeric_gradient(
        |w| {
            let (g, _, root) = loss(&x, w, &b);
            g.value(root).item()
        },
        &w,
        FD_STEP,
    );
    println!("dL/dW (central diff) = {numeric:?}");
    println!("max relative error   = {:.2e}", max_relative_error(&analytic, &numeric, 1e-3));

    // The gradient-reversal node is the identity going forward and flips
    // and scales the gradient going back.
    let mut g = Graph::new();
    let a = g.leaf(Tensor::vector(vec![1.0, 2.0])?);
    let r = g.grl(a, 0.5);
    let sq = g.square(r);
    let root = g.sum(sq);
    g.backward(root)?;
    println!("grl forward = {:?}, grad = {:?}", g.value(r).data(), g.grad(a).data());
    Ok(())
}
