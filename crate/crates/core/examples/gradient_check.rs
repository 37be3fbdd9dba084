//! Compares backprop gradients against central finite differences, first on
//! one hand-built network and then on a batch of random small networks.

use sage::gradcheck::{max_rel_error, run_suite};
use sage::nn::{
    finite_difference_grad, init_network, loss_and_grad, Activation, Batch, LossKind, NetworkSpec,
    Targets,
};

fn main() -> sage::Result<()> {
    let spec = NetworkSpec::new(
        vec![2, 4, 3],
        Activation::Tanh,
        LossKind::SoftmaxCrossEntropy,
    )?;
    let params = init_network(&spec, 7)?;
    let batch = Batch::new(
        vec![0.5, -1.0, 1.5, 0.25, -0.3, 0.8],
        2,
        Targets::Classes(vec![0, 2, 1]),
    )?;
    let (loss, grad) = loss_and_grad(&spec, &params, &batch)?;
    let fd = finite_difference_grad(&spec, &params, &batch, 1e-6)?;
    println!(
        "[2, 4, 3] tanh: loss {loss:.6}, {} params, max rel error {:.2e}",
        spec.parameter_count(),
        max_rel_error(grad.as_slice(), fd.as_slice())
    );

    let report = run_suite(20, 1, 1e-6, 1e-5)?;
    for case in &report.cases {
        println!(
            "{:>16} {:?} {:?} batch {:>2}: {:.2e}",
            format!("{:?}", case.layer_dims),
            case.activation,
            case.loss,
            case.batch_size,
            case.max_rel_error
        );
    }
    println!(
        "worst {:.2e} -> {}",
        report.max_rel_error(),
        if report.passed() { "PASS" } else { "FAIL" }
    );
    Ok(())
}
