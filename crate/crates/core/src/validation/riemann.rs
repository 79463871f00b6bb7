//! Exact Riemann solver for the 1D Euler equations (Newton iteration on the
//! star pressure, Toro-style shock/rarefaction branch functions and
//! similarity sampling). Serves as the reference for the shock tube checks.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RiemannState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StarRegion {
    pub p: f64,
    pub u: f64,
    pub rho_l: f64,
    pub rho_r: f64,
    pub residual: f64,
}

fn branch(p: f64, s: &RiemannState, gamma: f64) -> (f64, f64) {
    let a = (gamma * s.p / s.rho).sqrt();
    if p > s.p {
        // Shock.
        let ak = 2.0 / ((gamma + 1.0) * s.rho);
        let bk = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let f = (p - s.p) * (ak / (p + bk)).sqrt();
        let df = (ak / (p + bk)).sqrt() * (1.0 - 0.5 * (p - s.p) / (p + bk));
        (f, df)
    } else {
        // Rarefaction.
        let pr = p / s.p;
        let f = 2.0 * a / (gamma - 1.0) * (pr.powf((gamma - 1.0) / (2.0 * gamma)) - 1.0);
        let df = (1.0 / (s.rho * a)) * pr.powf(-(gamma + 1.0) / (2.0 * gamma));
        (f, df)
    }
}

/// Star-region pressure and velocity by Newton iteration to a 1e-12 residual.
pub fn solve_riemann(left: &RiemannState, right: &RiemannState, gamma: f64) -> Result<StarRegion> {
    let a_l = (gamma * left.p / left.rho).sqrt();
    let a_r = (gamma * right.p / right.rho).sqrt();
    if 2.0 * (a_l + a_r) / (gamma - 1.0) <= right.u - left.u {
        return Err(Error::Vacuum);
    }
    // Two-rarefaction initial guess, floored away from zero.
    let z = (gamma - 1.0) / (2.0 * gamma);
    let guess = ((a_l + a_r - 0.5 * (gamma - 1.0) * (right.u - left.u))
        / (a_l / left.p.powf(z) + a_r / right.p.powf(z)))
    .powf(1.0 / z);
    let mut p = guess.max(1e-12 * (left.p + right.p));
    let mut residual = f64::MAX;
    for _ in 0..100 {
        let (fl, dfl) = branch(p, left, gamma);
        let (fr, dfr) = branch(p, right, gamma);
        let f = fl + fr + right.u - left.u;
        residual = f.abs();
        let step = f / (dfl + dfr);
        let p_new = (p - step).max(1e-14 * (left.p + right.p));
        if (p_new - p).abs() <= 1e-14 * p {
            p = p_new;
            let (fl, _) = branch(p, left, gamma);
            let (fr, _) = branch(p, right, gamma);
            residual = (fl + fr + right.u - left.u).abs();
            break;
        }
        p = p_new;
    }
    let (fl, _) = branch(p, left, gamma);
    let (fr, _) = branch(p, right, gamma);
    let u = 0.5 * (left.u + right.u) + 0.5 * (fr - fl);
    let gm = (gamma - 1.0) / (gamma + 1.0);
    let rho_l = if p > left.p {
        left.rho * ((p / left.p + gm) / (gm * p / left.p + 1.0))
    } else {
        left.rho * (p / left.p).powf(1.0 / gamma)
    };
    let rho_r = if p > right.p {
        right.rho * ((p / right.p + gm) / (gm * p / right.p + 1.0))
    } else {
        right.rho * (p / right.p).powf(1.0 / gamma)
    };
    Ok(StarRegion {
        p,
        u,
        rho_l,
        rho_r,
        residual,
    })
}

/// Samples the self-similar solution at xi = x/t.
pub fn sample_riemann(
    left: &RiemannState,
    right: &RiemannState,
    gamma: f64,
    xi: f64,
) -> Result<RiemannState> {
    let star = solve_riemann(left, right, gamma)?;
    let a_l = (gamma * left.p / left.rho).sqrt();
    let a_r = (gamma * right.p / right.rho).sqrt();
    if xi <= star.u {
        // Left of the contact.
        if star.p > left.p {
            let sl = left.u
                - a_l
                    * ((gamma + 1.0) / (2.0 * gamma) * star.p / left.p
                        + (gamma - 1.0) / (2.0 * gamma))
                    .sqrt();
            if xi <= sl {
                Ok(*left)
            } else {
                Ok(RiemannState {
                    rho: star.rho_l,
                    u: star.u,
                    p: star.p,
                })
            }
        } else {
            let a_star = a_l * (star.p / left.p).powf((gamma - 1.0) / (2.0 * gamma));
            let head = left.u - a_l;
            let tail = star.u - a_star;
            if xi <= head {
                Ok(*left)
            } else if xi >= tail {
                Ok(RiemannState {
                    rho: star.rho_l,
                    u: star.u,
                    p: star.p,
                })
            } else {
                let u = 2.0 / (gamma + 1.0) * (a_l + 0.5 * (gamma - 1.0) * left.u + xi);
                let a = a_l + 0.5 * (gamma - 1.0) * (left.u - u);
                Ok(RiemannState {
                    rho: left.rho * (a / a_l).powf(2.0 / (gamma - 1.0)),
                    u,
                    p: left.p * (a / a_l).powf(2.0 * gamma / (gamma - 1.0)),
                })
            }
        }
    } else if star.p > right.p {
        let sr = right.u
            + a_r
                * ((gamma + 1.0) / (2.0 * gamma) * star.p / right.p
                    + (gamma - 1.0) / (2.0 * gamma))
                .sqrt();
        if xi >= sr {
            Ok(*right)
        } else {
            Ok(RiemannState {
                rho: star.rho_r,
                u: star.u,
                p: star.p,
            })
        }
    } else {
        let a_star = a_r * (star.p / right.p).powf((gamma - 1.0) / (2.0 * gamma));
        let head = right.u + a_r;
        let tail = star.u + a_star;
        if xi >= head {
            Ok(*right)
        } else if xi <= tail {
            Ok(RiemannState {
                rho: star.rho_r,
                u: star.u,
                p: star.p,
            })
        } else {
            let u = 2.0 / (gamma + 1.0) * (-a_r + 0.5 * (gamma - 1.0) * right.u + xi);
            let a = a_r - 0.5 * (gamma - 1.0) * (right.u - u);
            Ok(RiemannState {
                rho: right.rho * (a / a_r).powf(2.0 / (gamma - 1.0)),
                u,
                p: right.p * (a / a_r).powf(2.0 * gamma / (gamma - 1.0)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOD_L: RiemannState = RiemannState {
        rho: 1.0,
        u: 0.0,
        p: 1.0,
    };
    const SOD_R: RiemannState = RiemannState {
        rho: 0.125,
        u: 0.0,
        p: 0.1,
    };

    #[test]
    fn classic_sod_star_state() {
        let star = solve_riemann(&SOD_L, &SOD_R, 1.4).unwrap();
        assert!(star.residual < 1e-12);
        assert!((star.p - 0.30313).abs() < 5e-6, "p* = {}", star.p);
        assert!((star.u - 0.92745).abs() < 5e-6, "u* = {}", star.u);
        assert!((star.rho_l - 0.42632).abs() < 5e-6);
        assert!((star.rho_r - 0.26557).abs() < 5e-6);
        // Sampling at x/t = 0 sits inside the left rarefaction fan's tail
        // state for Sod.
        let s = sample_riemann(&SOD_L, &SOD_R, 1.4, 0.0).unwrap();
        assert!((s.p - 0.30313).abs() < 5e-6);
    }

    #[test]
    fn equal_states_give_uniform_solution() {
        let s = sample_riemann(&SOD_L, &SOD_L, 1.4, 0.37).unwrap();
        assert!((s.rho - SOD_L.rho).abs() < 1e-12);
        assert!((s.u - SOD_L.u).abs() < 1e-12);
        assert!((s.p - SOD_L.p).abs() < 1e-12);
    }

    #[test]
    fn pure_contact_advects_density_jump() {
        let l = RiemannState {
            rho: 1.0,
            u: 0.7,
            p: 1.0,
        };
        let r = RiemannState {
            rho: 0.3,
            u: 0.7,
            p: 1.0,
        };
        let star = solve_riemann(&l, &r, 1.4).unwrap();
        assert!((star.p - 1.0).abs() < 1e-10);
        assert!((star.u - 0.7).abs() < 1e-10);
        // Density jump rides at u: left of the contact, left density.
        let s = sample_riemann(&l, &r, 1.4, 0.69).unwrap();
        assert!((s.rho - 1.0).abs() < 1e-9);
        let s = sample_riemann(&l, &r, 1.4, 0.71).unwrap();
        assert!((s.rho - 0.3).abs() < 1e-9);
    }

    #[test]
    fn vacuum_detected() {
        let l = RiemannState {
            rho: 1.0,
            u: -100.0,
            p: 0.01,
        };
        let r = RiemannState {
            rho: 1.0,
            u: 100.0,
            p: 0.01,
        };
        assert!(solve_riemann(&l, &r, 1.4).is_err());
    }
}
