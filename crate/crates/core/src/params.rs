//! Physical parameters, unit conventions and chain geometry.
//!
//! Rates are stored in units of `Γ0`, positions in nanometres. Physical units
//! only enter through [`UnitSystem`] when propagation phases are computed.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitSystem {
    /// Free-space decay rate `Γ0` in Hz.
    pub gamma0_hz: f64,
    /// Emitter transition wavelength in nm.
    pub lambda_e_nm: f64,
    /// Group velocity used for propagation phases, m/s.
    pub group_velocity: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            gamma0_hz: 7.5e6,
            lambda_e_nm: 655.0,
            group_velocity: SPEED_OF_LIGHT,
        }
    }
}

impl UnitSystem {
    pub fn validate(&self) -> Result<()> {
        positive("gamma0_hz", self.gamma0_hz)?;
        positive("lambda_e_nm", self.lambda_e_nm)?;
        positive("group_velocity", self.group_velocity)
    }

    /// Resonant wavenumber `ω_eg/c` in rad/nm; multiplies a separation to give
    /// the dimensionless argument of the dipole kernel.
    pub fn emitter_wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda_e_nm
    }

    /// Propagation phase per unit detuning (in `Γ0`) per nanometre, for a guide
    /// with group velocity `velocity` (m/s). `Γ0` is converted to rad/s as
    /// `2π · gamma0_hz`.
    pub fn phase_per_detuning_nm(&self, velocity: f64) -> f64 {
        2.0 * PI * self.gamma0_hz * 1e-9 / velocity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterParams {
    /// Non-guided spontaneous emission rate `γ` (loss), in `Γ0`.
    pub gamma: f64,
    /// Coupling rate to the right-moving bottom-guide mode, in `Γ0`.
    pub big_gamma_bottom: f64,
    /// Coupling rate to the right-moving top-guide mode, in `Γ0`.
    pub big_gamma_top: f64,
    /// Left-moving bottom-guide rate. Only read in bidirectional mode.
    pub big_gamma_bottom_left: f64,
    /// Left-moving top-guide rate. Only read in bidirectional mode.
    pub big_gamma_top_left: f64,
    /// Angle between the dipole moment and the inter-emitter axis, radians.
    pub theta_dipole: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        EmitterParams {
            gamma: 6.86,
            big_gamma_bottom: 11.03,
            big_gamma_top: 11.03,
            big_gamma_bottom_left: 11.03,
            big_gamma_top_left: 11.03,
            theta_dipole: FRAC_PI_2,
        }
    }
}

impl EmitterParams {
    /// Same waveguide rate `big_gamma` on every channel.
    pub fn symmetric(gamma: f64, big_gamma: f64) -> Self {
        EmitterParams {
            gamma,
            big_gamma_bottom: big_gamma,
            big_gamma_top: big_gamma,
            big_gamma_bottom_left: big_gamma,
            big_gamma_top_left: big_gamma,
            ..EmitterParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("gamma", self.gamma)?;
        non_negative("big_gamma_bottom", self.big_gamma_bottom)?;
        non_negative("big_gamma_top", self.big_gamma_top)?;
        non_negative("big_gamma_bottom_left", self.big_gamma_bottom_left)?;
        non_negative("big_gamma_top_left", self.big_gamma_top_left)?;
        if !(0.0..=PI).contains(&self.theta_dipole) {
            return Err(Error::domain(
                "theta_dipole",
                format!("{} is outside [0, π]", self.theta_dipole),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiralityMode {
    /// Only right-moving modes couple; no reflections.
    Chiral,
    Bidirectional,
}

/// Emitter positions along the ladder, shared by both guides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterChain {
    positions_nm: Vec<f64>,
    pub params: EmitterParams,
}

impl EmitterChain {
    /// Builds a chain from explicit positions, which must be finite and
    /// strictly increasing.
    pub fn new(positions_nm: Vec<f64>, params: EmitterParams) -> Result<Self> {
        if positions_nm.is_empty() {
            return Err(Error::domain("positions_nm", "chain needs at least one emitter"));
        }
        if positions_nm.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("positions_nm", "non-finite position"));
        }
        if let Some(w) = positions_nm.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::domain(
                "positions_nm",
                format!("positions not strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        params.validate()?;
        Ok(EmitterChain {
            positions_nm,
            params,
        })
    }

    pub fn positions_nm(&self) -> &[f64] {
        &self.positions_nm
    }

    pub fn count(&self) -> usize {
        self.positions_nm.len()
    }

    /// Successive separations `x_{j+1} − x_j`.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions_nm.windows(2).map(|w| w[1] - w[0])
    }

    /// The same chain rigidly shifted by `offset_nm`.
    pub fn translated(&self, offset_nm: f64) -> Self {
        EmitterChain {
            positions_nm: self.positions_nm.iter().map(|x| x + offset_nm).collect(),
            params: self.params,
        }
    }
}

pub fn build_periodic_chain(n: usize, spacing_nm: f64, params: EmitterParams) -> Result<EmitterChain> {
    if n == 0 {
        return Err(Error::domain("n", "chain needs at least one emitter"));
    }
    positive("spacing_nm", spacing_nm)?;
    EmitterChain::new((0..n).map(|j| j as f64 * spacing_nm).collect(), params)
}

/// Waveguide coupling amplitude `V` with `V²/v_g = Γ`.
pub fn coupling_amplitude(big_gamma: f64, group_velocity: f64) -> f64 {
    debug_assert!(big_gamma >= 0.0 && group_velocity > 0.0);
    (big_gamma * group_velocity).sqrt()
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, format!("{value} must be positive and finite")))
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, format!("{value} must be non-negative and finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_chain_positions() {
        let p = EmitterParams::default();
        let two = build_periodic_chain(2, 655.0 / 20.0, p).unwrap();
        assert_eq!(two.positions_nm(), &[0.0, 32.75]);

        let one = build_periodic_chain(1, 1e6, p).unwrap();
        assert_eq!(one.positions_nm(), &[0.0]);

        let five = build_periodic_chain(5, 32.75, p).unwrap();
        assert_eq!(five.positions_nm(), &[0.0, 32.75, 65.5, 98.25, 131.0]);
        assert_eq!(five.count(), 5);
    }

    #[test]
    fn periodic_chain_rejects_bad_input() {
        let p = EmitterParams::default();
        assert!(matches!(build_periodic_chain(0, 1.0, p), Err(Error::Domain { name: "n", .. })));
        assert!(build_periodic_chain(3, 0.0, p).is_err());
        assert!(build_periodic_chain(3, -2.0, p).is_err());
        assert!(build_periodic_chain(3, f64::NAN, p).is_err());
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let p = EmitterParams::default();
        let a = build_periodic_chain(20, 32.75, p).unwrap();
        let b = build_periodic_chain(20, 32.75, p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn explicit_positions_must_increase() {
        let p = EmitterParams::default();
        assert!(EmitterChain::new(vec![0.0, 1.0, 1.0], p).is_err());
        assert!(EmitterChain::new(vec![0.0, 2.0, 1.0], p).is_err());
        assert!(EmitterChain::new(vec![], p).is_err());
        assert!(EmitterChain::new(vec![-3.0, 4.0], p).is_ok());
    }

    #[test]
    fn params_validation() {
        let mut p = EmitterParams::default();
        assert!(p.validate().is_ok());
        p.gamma = -1.0;
        assert!(p.validate().is_err());
        let mut p = EmitterParams::default();
        p.theta_dipole = 4.0;
        assert!(p.validate().is_err());
        assert!(UnitSystem::default().validate().is_ok());
        let u = UnitSystem {
            lambda_e_nm: 0.0,
            ..UnitSystem::default()
        };
        assert!(u.validate().is_err());
    }

    #[test]
    fn coupling_amplitude_calibration() {
        assert_eq!(coupling_amplitude(0.0, 1.0), 0.0);
        assert_eq!(coupling_amplitude(1.0, 1.0), 1.0);
        let v = coupling_amplitude(11.03, 1.0);
        assert!((v - 3.3211).abs() < 1e-4);
        for &(g, vg) in &[(11.03, 1.0), (0.3, SPEED_OF_LIGHT), (250.0, 2.0e8)] {
            let amp = coupling_amplitude(g, vg);
            assert!((amp * amp / vg - g).abs() <= 4.0 * f64::EPSILON * g);
        }
        let mut last = -1.0;
        for i in 0..100 {
            let amp = coupling_amplitude(i as f64 * 0.5, 3.0);
            assert!(amp > last);
            last = amp;
        }
    }
}
