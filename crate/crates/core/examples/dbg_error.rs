use semilab_core::gridcore::SpaceGrid;
use semilab_core::potentials::{PotentialSpec, RoughPotential};
use semilab_core::residuals::{error_field, error_term_paired, BumpTransform, ErrorVariant, TestFunctionDictionary};
use semilab_core::states::{CoherentState, MixedState};
use semilab_core::phase_space;

fn main() {
    let eps = 0.25;
    let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
    let f0 = CoherentState::new(vec![0.3], vec![0.5], eps).field(grid);
    let s = MixedState::pure(eps, f0).unwrap();
    let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
    let dict = TestFunctionDictionary::standard();
    for idx in [1usize, 5, 11] {
        let f = &dict.functions[idx];
        println!("fn {idx}: scale {} fx {} fp {} parity {:?}", f.scale, f.freq_x, f.freq_p, f.parity);
        let bhat = BumpTransform::new(f.scale, 200.0);
        let direct = error_term_paired(&s, &pot, f, ErrorVariant::FullDelta, &bhat).unwrap();
        let (ef, imag) = error_field(&s, &pot, ErrorVariant::FullDelta).unwrap();
        let via_field = ef.pair_with(|x, p| f.eval(x[0], p[0]));
        let w = phase_space::wigner(&s).unwrap();
        let third = -w.pair_with(|x, p| x[0] * f.grad_p(x[0], p[0]));
        println!("  direct {:.6e}+{:.1e}i  field {via_field:.6e}  analytic {third:.6e}  imag {imag:.2e}", direct.re, direct.im);
    }
}
