use semilab_core::classical_dynamics::{sample_initial, SampleSource};
use semilab_core::gridcore::GaussianKernel;

fn main() {
    let k = GaussianKernel::new(0.5, 2).unwrap();
    let src = SampleSource::from_analytic(
        |x, p| k.eval(&[x - 0.3, p + 0.2]),
        -3.0, 3.6, -3.2, 3.0, 200,
    ).unwrap();
    println!("cells with mass: {}", src.cell_mass.iter().filter(|&&v| v > 0.0).count());
    let total: f64 = src.cell_mass.iter().sum();
    // weighted center from source itself
    let mut cx = 0.0; let mut cp = 0.0;
    for (c, m) in src.cell_mass.iter().enumerate() {
        cx += src.centers[2*c] * m / total;
        cp += src.centers[2*c+1] * m / total;
    }
    println!("source mean: ({cx:.4}, {cp:.4})");
    let ens = sample_initial(&src, 40000, 7).unwrap();
    let mx: f64 = ens.xs.iter().sum::<f64>() / 40000.0;
    let mp: f64 = ens.ps.iter().sum::<f64>() / 40000.0;
    println!("ensemble mean: ({mx:.4}, {mp:.4})");
}
