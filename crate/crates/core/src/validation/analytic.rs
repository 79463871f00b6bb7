//! Closed-form benchmark solutions: steady Darcy pipe flow with the
//! Carman-Kozeny permeability and the one-dimensional consolidation series.

/// True (pore) fluid speed in a packed pipe section under a pressure drop:
/// v = (1/n_local) (d^2 / 180 eta0) ((1-phi)^3 / phi^2) (dp / L).
pub fn darcy_exact(phi: f64, d: f64, eta0: f64, dp: f64, l: f64, n_local: f64) -> f64 {
    let one_m = 1.0 - phi;
    (1.0 / n_local) * (d * d / (180.0 * eta0)) * (one_m.powi(3) / (phi * phi)) * (dp / l)
}

/// Constrained (oedometer) modulus E (1 - nu) / (1 - nu - 2 nu^2).
pub fn constrained_modulus(e: f64, nu: f64) -> f64 {
    e * (1.0 - nu) / (1.0 - nu - 2.0 * nu * nu)
}

/// Consolidation coefficient c_v = E_v n^3 d^2 / (180 (1-n)^2 eta0).
pub fn consolidation_coefficient(e: f64, nu: f64, n: f64, d: f64, eta0: f64) -> f64 {
    constrained_modulus(e, nu) * n.powi(3) * d * d / (180.0 * (1.0 - n).powi(2) * eta0)
}

/// Normalized consolidation series p/sigma0 at dimensionless time T_v.
/// The series coordinate measures depth below the drained surface: the sum
/// vanishes at zeta = 0 (the drained boundary) and tends to 1 deep in the
/// column as T_v -> 0. Truncated when a term drops below 1e-12.
pub fn terzaghi_series(zeta_over_h: f64, tv: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0..2000 {
        let big_m = std::f64::consts::FRAC_PI_2 * (2.0 * m as f64 + 1.0);
        let term = 2.0 / big_m * (big_m * zeta_over_h).sin() * (-big_m * big_m * tv).exp();
        sum += term;
        if (2.0 / big_m) * (-big_m * big_m * tv).exp() < 1e-12 {
            break;
        }
    }
    sum
}

/// Pore pressure at depth-below-drainage z (0 <= z <= H) and time t.
#[allow(clippy::too_many_arguments)]
pub fn terzaghi_exact(
    z: f64,
    t: f64,
    sigma0: f64,
    h: f64,
    e: f64,
    nu: f64,
    n: f64,
    d: f64,
    eta0: f64,
) -> f64 {
    let cv = consolidation_coefficient(e, nu, n, d, eta0);
    let tv = cv * t / (h * h);
    sigma0 * terzaghi_series(z / h, tv)
}
