//! Analytic one- and two-emitter results for the chiral ladder with equal
//! coupling `Γ` to both guides and unit group velocities.
//!
//! Nothing here touches the general solver; these are the reference values it
//! is checked against. The propagation factor between the two emitters is
//! `e^{iθ}` with `θ = r₁₂Δ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoEmitterParams {
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub j_ddi: f64,
    /// Propagation phase `θ = r₁₂Δ` between the emitters, radians.
    pub phase: f64,
}

impl TwoEmitterParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.delta, self.gamma, self.big_gamma, self.j_ddi, self.phase];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("two_emitter", "all parameters must be finite"));
        }
        if self.gamma < 0.0 || self.big_gamma < 0.0 {
            return Err(Error::domain("two_emitter", "rates must be non-negative"));
        }
        Ok(())
    }

    fn denominator(&self) -> Result<Complex64> {
        self.validate()?;
        let (j, g) = (self.j_ddi, self.big_gamma);
        let width = Complex64::new(self.gamma + 2.0 * g, -2.0 * self.delta);
        let den = 4.0 * j * j - 8.0 * I * Complex64::cis(self.phase) * j * g + width * width;
        if den.norm() == 0.0 {
            Err(Error::Pole("two-emitter transmission denominator vanishes"))
        } else {
            Ok(den)
        }
    }

    fn bottom_numerator(&self) -> Complex64 {
        let (j, g) = (self.j_ddi, self.big_gamma);
        let lossy = Complex64::new(self.gamma, -2.0 * self.delta);
        4.0 * j * j + 4.0 * g * g + lossy * lossy + 8.0 * j * g * self.phase.sin()
    }

    fn top_numerator(&self) -> Complex64 {
        let inner = Complex64::new(2.0 * self.delta + 2.0 * self.j_ddi * self.phase.cos(), self.gamma);
        4.0 * I * self.big_gamma * inner
    }
}

/// Port-2 transmission amplitude of two emitters.
pub fn t_b2_closed(p: &TwoEmitterParams) -> Result<Complex64> {
    let den = p.denominator()?;
    Ok(p.bottom_numerator() / den)
}

/// Port-4 transmission amplitude of two emitters.
pub fn t_t2_closed(p: &TwoEmitterParams) -> Result<Complex64> {
    let den = p.denominator()?;
    Ok(p.top_numerator() / den)
}

/// Two-emitter routing efficiency `(|t_t|² − |t_b|²)/(|t_t|² + |t_b|²)`.
/// The shared denominator cancels, so only the numerators are compared.
pub fn xi2_closed(p: &TwoEmitterParams) -> Result<f64> {
    p.denominator()?;
    let top = p.top_numerator().norm_sqr();
    let bottom = p.bottom_numerator().norm_sqr();
    if top + bottom == 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok((top - bottom) / (top + bottom))
}

/// The expanded two-emitter ratio written out term by term,
/// `−[4J² + γ² + 4γΓ + 4Γ² − 4iγΔ − 8iΓΔ − 4Δ² − 8iJΓcosθ + 8JΓsinθ] /
///   [4J² + γ² − 4γΓ + 4Γ² − 4iγΔ + 8iΓΔ − 4Δ² + 8iJΓcosθ + 8JΓsinθ]`.
///
/// This is the amplitude ratio `(t_t − t_b)/(t_t + t_b)`, not the
/// probability-based efficiency of [`xi2_closed`]; the two agree only at the
/// routing extremes `t_b = 0` (→ +1) and `t_t = 0` (→ −1).
pub fn xi2_amplitude_ratio(p: &TwoEmitterParams) -> Result<Complex64> {
    p.validate()?;
    let TwoEmitterParams {
        delta: d,
        gamma: g,
        big_gamma: bg,
        j_ddi: j,
        phase,
    } = *p;
    let (s, c) = phase.sin_cos();
    let common = 4.0 * j * j + g * g + 4.0 * bg * bg - 4.0 * d * d + 8.0 * j * bg * s;
    let num = Complex64::new(common + 4.0 * g * bg, -4.0 * g * d - 8.0 * bg * d - 8.0 * j * bg * c);
    let den = Complex64::new(common - 4.0 * g * bg, -4.0 * g * d + 8.0 * bg * d + 8.0 * j * bg * c);
    if den.norm() == 0.0 {
        return Err(Error::Pole("two-emitter efficiency denominator vanishes"));
    }
    Ok(-num / den)
}

/// Single emitter with rate `Γ` into each guide: `(t_b, t_t)`.
pub fn t_single_closed(delta: f64, gamma: f64, big_gamma: f64) -> (Complex64, Complex64) {
    let den = Complex64::new(delta, gamma / 2.0 + big_gamma);
    (Complex64::new(delta, gamma / 2.0) / den, -I * big_gamma / den)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn p(delta: f64, gamma: f64, big_gamma: f64, j_ddi: f64, phase: f64) -> TwoEmitterParams {
        TwoEmitterParams {
            delta,
            gamma,
            big_gamma,
            j_ddi,
            phase,
        }
    }

    #[test]
    fn decoupled_pair() {
        let q = p(3.0, 1.0, 0.0, 5.0, 0.2);
        assert_eq!(t_t2_closed(&q).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(xi2_closed(&q).unwrap(), -1.0);
        assert!((xi2_amplitude_ratio(&q).unwrap() - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lossless_resonant_pair_routes_back() {
        // each emitter swaps the guides on resonance, so the second one undoes the first
        let q = p(0.0, 0.0, 4.0, 0.0, 0.0);
        assert!(t_t2_closed(&q).unwrap().norm() < 1e-15);
        assert!((t_b2_closed(&q).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(xi2_closed(&q).unwrap(), -1.0);
    }

    #[test]
    fn no_ddi_composes_single_emitters() {
        // without DDI and with θ = 0 the pair is two single-emitter couplers in series
        for &(d, g, bg) in &[(0.0, 6.86, 11.03), (2.5, 0.0, 1.0), (-17.0, 3.0, 8.0)] {
            let (tb1, tt1) = t_single_closed(d, g, bg);
            let q = p(d, g, bg, 0.0, 0.0);
            assert!((t_b2_closed(&q).unwrap() - (tb1 * tb1 + tt1 * tt1)).norm() < 1e-14);
            assert!((t_t2_closed(&q).unwrap() - 2.0 * tb1 * tt1).norm() < 1e-14);
        }
    }

    #[test]
    fn pole_detected() {
        // γ = Γ = 0, J = 0, Δ = 0: denominator is exactly zero
        let q = p(0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(t_b2_closed(&q), Err(Error::Pole(_))));
        assert!(matches!(t_t2_closed(&q), Err(Error::Pole(_))));
        assert!(xi2_closed(&q).is_err());
        assert!(t_b2_closed(&p(f64::NAN, 0.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn single_emitter_limits() {
        let (tb, tt) = t_single_closed(0.0, 0.0, 3.0);
        assert!(tb.norm() == 0.0);
        assert!((tt - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let (_, tt) = t_single_closed(0.0, 6.86, 11.03);
        assert!((tt.norm_sqr() - 0.582).abs() < 5e-4);
        let (tb, tt) = t_single_closed(1e12, 6.86, 11.03);
        assert!((tb - 1.0).norm() < 1e-10 && tt.norm() < 1e-10);
    }

    #[test]
    fn paper_two_emitter_routing_point() {
        let q = p(25.3, 6.86, 11.03, 23.10, 0.0);
        let pt = t_t2_closed(&q).unwrap().norm_sqr();
        assert!((pt - 0.746).abs() < 0.02, "{pt}");
    }

    proptest! {
        #[test]
        fn top_equals_bottom_minus_one(d in -300.0f64..300.0, g in 0.0f64..20.0, bg in 0.01f64..30.0,
                                       j in -60.0f64..60.0, th in -10.0f64..10.0) {
            let q = p(d, g, bg, j, th);
            let diff = t_t2_closed(&q).unwrap() - t_b2_closed(&q).unwrap() + 1.0;
            prop_assert!(diff.norm() < 1e-12);
        }

        #[test]
        fn lossless_pair_conserves_flux(d in -300.0f64..300.0, bg in 0.01f64..30.0,
                                        j in -60.0f64..60.0, th in -10.0f64..10.0) {
            let q = p(d, 0.0, bg, j, th);
            let total = t_t2_closed(&q).unwrap().norm_sqr() + t_b2_closed(&q).unwrap().norm_sqr();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn efficiency_consistent_with_amplitudes(d in -300.0f64..300.0, g in 0.0f64..20.0, bg in 0.01f64..30.0,
                                                 j in -60.0f64..60.0, th in -10.0f64..10.0) {
            let q = p(d, g, bg, j, th);
            let tt = t_t2_closed(&q).unwrap().norm_sqr();
            let tb = t_b2_closed(&q).unwrap().norm_sqr();
            let xi = xi2_closed(&q).unwrap();
            prop_assert!((xi - (tt - tb) / (tt + tb)).abs() < 1e-10);
            prop_assert!((-1.0..=1.0).contains(&xi));
        }

        #[test]
        fn expanded_ratio_is_amplitude_ratio(d in -300.0f64..300.0, g in 0.0f64..20.0, bg in 0.01f64..30.0,
                                             j in -60.0f64..60.0, th in -10.0f64..10.0) {
            let q = p(d, g, bg, j, th);
            let tt = t_t2_closed(&q).unwrap();
            let tb = t_b2_closed(&q).unwrap();
            let expect = (tt - tb) / (tt + tb);
            let got = xi2_amplitude_ratio(&q).unwrap();
            prop_assert!((got - expect).norm() <= 1e-9 * expect.norm().max(1.0));
        }
    }
}
