use semilab_core::residuals::BumpTransform;
fn main() {
    for s in [4.0, 7.5] {
        let b = BumpTransform::new(s, 200.0);
        for cut in [32.0, 48.0, 64.0, 80.0, 120.0] {
            println!("s={s} cut={cut}: tail {:.3e}", 1.0 - b.mass_fraction_within(cut));
        }
        // print raw |Bhat| at far y
        for y in [60.0, 100.0, 150.0] {
            println!("  |Bhat({y})| = {:.3e}", b.eval(y).abs());
        }
    }
}
