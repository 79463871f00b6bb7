//! Face flux functions: the entropy-adjusted Roe solver (Roe 1981, Harten
//! 1997) with the porosity factor on the convective block, a two-wave
//! variant for the barotropic model with passively advected energy, a local
//! Lax-Friedrichs fallback for inadmissible Roe averages, viscous and heat
//! fluxes from cell-centered gradients, and the compressive-switch
//! artificial viscosity used near strong shocks.

use crate::fluid::eos::{EosOut, FluidEos};
use crate::fluid::FluidState;
use crate::math::{v2, M2, V2};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaceFlux {
    pub mass: f64,
    pub mom: V2,
    pub en: f64,
}

impl FaceFlux {
    pub fn scale(self, s: f64) -> FaceFlux {
        FaceFlux {
            mass: self.mass * s,
            mom: self.mom * s,
            en: self.en * s,
        }
    }

    pub fn add(&mut self, o: &FaceFlux) {
        self.mass += o.mass;
        self.mom += o.mom;
        self.en += o.en;
    }

    pub fn as_state(&self) -> FluidState {
        FluidState::new(self.mass, self.mom, self.en)
    }
}

/// Inviscid oriented flux n * [rho v.n; rho v (v.n) + p n; (rho E + p) v.n].
pub fn inviscid_flux(u: &FluidState, p: f64, n_face: f64, normal: V2) -> FaceFlux {
    let v = u.vel();
    let un = v.dot(&normal);
    FaceFlux {
        mass: n_face * u.rho * un,
        mom: (u.mom * un + normal * p) * n_face,
        en: n_face * (u.en + p) * un,
    }
}

/// Harten's entropy correction: |lambda| regularized below delta.
fn entropy_q(lambda: f64, delta: f64) -> f64 {
    let al = lambda.abs();
    if al >= delta || delta == 0.0 {
        al
    } else {
        0.5 * (lambda * lambda / delta + delta)
    }
}

/// Local Lax-Friedrichs flux (fallback when the Roe average is not
/// physical).
pub fn llf_flux(
    u_l: &FluidState,
    u_r: &FluidState,
    out_l: &EosOut,
    out_r: &EosOut,
    n_face: f64,
    normal: V2,
) -> FaceFlux {
    let f_l = inviscid_flux(u_l, out_l.p, n_face, normal);
    let f_r = inviscid_flux(u_r, out_r.p, n_face, normal);
    let s = (u_l.vel().dot(&normal).abs() + out_l.a)
        .max(u_r.vel().dot(&normal).abs() + out_r.a)
        * n_face;
    let du = *u_r - *u_l;
    FaceFlux {
        mass: 0.5 * (f_l.mass + f_r.mass - s * du.rho),
        mom: (f_l.mom + f_r.mom - du.mom * s) * 0.5,
        en: 0.5 * (f_l.en + f_r.en - s * du.en),
    }
}

/// Entropy-adjusted Roe flux h(u+, u-, n; normal). `u_l` sits on the -normal
/// side, `u_r` on the +normal side. Returns the flux and whether the LLF
/// fallback fired.
pub fn roe_flux(
    u_l: &FluidState,
    u_r: &FluidState,
    n_face: f64,
    normal: V2,
    eos: &FluidEos,
) -> Result<(FaceFlux, bool), crate::fluid::eos::EosFailure> {
    let out_l = eos.evaluate(u_l)?;
    let out_r = eos.evaluate(u_r)?;
    match eos {
        FluidEos::IdealGas { gamma, .. } => Ok(roe_ideal(
            u_l, u_r, &out_l, &out_r, *gamma, n_face, normal,
        )),
        FluidEos::Barotropic { .. } => {
            Ok((roe_barotropic(u_l, u_r, &out_l, &out_r, n_face, normal), false))
        }
    }
}

fn roe_ideal(
    u_l: &FluidState,
    u_r: &FluidState,
    out_l: &EosOut,
    out_r: &EosOut,
    gamma: f64,
    n_face: f64,
    normal: V2,
) -> (FaceFlux, bool) {
    let tangent = v2(-normal.y, normal.x);
    let (vl, vr) = (u_l.vel(), u_r.vel());
    let hl = (u_l.en + out_l.p) / u_l.rho;
    let hr = (u_r.en + out_r.p) / u_r.rho;

    // Roe averages.
    let sl = u_l.rho.sqrt();
    let sr = u_r.rho.sqrt();
    let w = sl / (sl + sr);
    let v_bar = vl * w + vr * (1.0 - w);
    let h_bar = hl * w + hr * (1.0 - w);
    let rho_bar = sl * sr;
    let a2 = (gamma - 1.0) * (h_bar - 0.5 * v_bar.norm_squared());
    if !(a2 > 0.0) || !a2.is_finite() {
        return (llf_flux(u_l, u_r, out_l, out_r, n_face, normal), true);
    }
    let a_bar = a2.sqrt();
    let un_bar = v_bar.dot(&normal);
    let ut_bar = v_bar.dot(&tangent);

    let d_rho = u_r.rho - u_l.rho;
    let d_p = out_r.p - out_l.p;
    let d_un = vr.dot(&normal) - vl.dot(&normal);
    let d_ut = vr.dot(&tangent) - vl.dot(&tangent);

    // Wave strengths.
    let b1 = (d_p - rho_bar * a_bar * d_un) / (2.0 * a2);
    let b2 = d_rho - d_p / a2;
    let b3 = (d_p + rho_bar * a_bar * d_un) / (2.0 * a2);
    let b4 = rho_bar * d_ut;

    let delta_a = 0.1 * a_bar; // acoustic waves only
    let q1 = entropy_q(un_bar - a_bar, delta_a);
    let q2 = entropy_q(un_bar, 0.0);
    let q3 = entropy_q(un_bar + a_bar, delta_a);

    // |A|(u_r - u_l) assembled from eigenvectors.
    let mut diss_rho = 0.0;
    let mut diss_mom = V2::zeros();
    let mut diss_en = 0.0;
    {
        // lambda = un - a : r = (1, v - a n, H - a un)
        let c = q1 * b1;
        diss_rho += c;
        diss_mom += (v_bar - normal * a_bar) * c;
        diss_en += c * (h_bar - a_bar * un_bar);
    }
    {
        // lambda = un : r = (1, v, |v|^2/2)
        let c = q2 * b2;
        diss_rho += c;
        diss_mom += v_bar * c;
        diss_en += c * 0.5 * v_bar.norm_squared();
    }
    {
        // lambda = un + a : r = (1, v + a n, H + a un)
        let c = q3 * b3;
        diss_rho += c;
        diss_mom += (v_bar + normal * a_bar) * c;
        diss_en += c * (h_bar + a_bar * un_bar);
    }
    {
        // shear wave: r = (0, t, v.t)
        let c = q2 * b4;
        diss_mom += tangent * c;
        diss_en += c * ut_bar;
    }

    let f_l = inviscid_flux(u_l, out_l.p, n_face, normal);
    let f_r = inviscid_flux(u_r, out_r.p, n_face, normal);
    (
        FaceFlux {
            mass: 0.5 * (f_l.mass + f_r.mass - n_face * diss_rho),
            mom: (f_l.mom + f_r.mom - diss_mom * n_face) * 0.5,
            en: 0.5 * (f_l.en + f_r.en - n_face * diss_en),
        },
        false,
    )
}

/// Two-wave (u +- a) plus advective decomposition for the barotropic model
/// (constant sound speed, arithmetic-mean face averages); the energy row is
/// advected passively.
fn roe_barotropic(
    u_l: &FluidState,
    u_r: &FluidState,
    out_l: &EosOut,
    out_r: &EosOut,
    n_face: f64,
    normal: V2,
) -> FaceFlux {
    let tangent = v2(-normal.y, normal.x);
    let a = out_l.a; // constant for this model
    let (vl, vr) = (u_l.vel(), u_r.vel());
    let v_bar = (vl + vr) * 0.5;
    let rho_bar = 0.5 * (u_l.rho + u_r.rho);
    let e_hat = 0.5 * (u_l.energy() + u_r.energy());
    let un_bar = v_bar.dot(&normal);

    let d_rho = u_r.rho - u_l.rho;
    let d_un = vr.dot(&normal) - vl.dot(&normal);
    let d_ut = vr.dot(&tangent) - vl.dot(&tangent);
    let d_en = u_r.en - u_l.en;

    let b1 = 0.5 * (d_rho - rho_bar * d_un / a);
    let b3 = 0.5 * (d_rho + rho_bar * d_un / a);
    let b4 = rho_bar * d_ut;

    let delta_a = 0.1 * a;
    let q1 = entropy_q(un_bar - a, delta_a);
    let q2 = entropy_q(un_bar, 0.0);
    let q3 = entropy_q(un_bar + a, delta_a);

    let diss_mass = q1 * b1 + q3 * b3;
    let mut diss_mom = (v_bar - normal * a) * (q1 * b1) + (v_bar + normal * a) * (q3 * b3);
    diss_mom += tangent * (q2 * b4);
    let diss_en = e_hat * diss_mass + q2 * (d_en - e_hat * d_rho);

    let f_l = inviscid_flux(u_l, out_l.p, n_face, normal);
    let f_r = inviscid_flux(u_r, out_r.p, n_face, normal);
    FaceFlux {
        mass: 0.5 * (f_l.mass + f_r.mass - n_face * diss_mass),
        mom: (f_l.mom + f_r.mom - diss_mom * n_face) * 0.5,
        en: 0.5 * (f_l.en + f_r.en - n_face * diss_en),
    }
}

/// Viscous and conductive face flux (enters the total flux with a minus
/// sign). `grad_v` and `grad_eps` are face-averaged cell gradients,
/// `v_face` the face velocity for the work term. `cond` is n k_f / c_v.
pub fn viscous_heat_flux(
    grad_v: &M2,
    grad_eps: V2,
    v_face: V2,
    normal: V2,
    eta_r: f64,
    cond: f64,
) -> FaceFlux {
    let d = (grad_v + grad_v.transpose()) * 0.5;
    let tr = d[(0, 0)] + d[(1, 1)];
    // tau = 2 eta D - (2/3) eta tr(D) I
    let txx = 2.0 * eta_r * d[(0, 0)] - 2.0 / 3.0 * eta_r * tr;
    let tyy = 2.0 * eta_r * d[(1, 1)] - 2.0 / 3.0 * eta_r * tr;
    let txy = 2.0 * eta_r * d[(0, 1)];
    let tn = v2(txx * normal.x + txy * normal.y, txy * normal.x + tyy * normal.y);
    let q_n = -cond * grad_eps.dot(&normal); // q.n with q = -n k_f grad(theta)
    FaceFlux {
        mass: 0.0,
        mom: tn,
        en: tn.dot(&v_face) - q_n,
    }
}

/// Shock-capturing artificial viscosity flux (compressive faces only).
/// Returned so that the total face flux is `roe - viscous - av`.
pub fn artificial_viscosity_flux(
    u_l: &FluidState,
    u_r: &FluidState,
    a_l: f64,
    a_r: f64,
    normal: V2,
    beta: f64,
) -> FaceFlux {
    let dv_n = (u_r.vel() - u_l.vel()).dot(&normal);
    let h_lambda = if dv_n < 0.0 {
        (a_l - a_r).abs() - dv_n
    } else {
        0.0
    };
    if h_lambda == 0.0 {
        return FaceFlux::default();
    }
    let a_min = a_l.min(a_r);
    let lambda_max = (a_l + u_l.vel().norm()).max(a_r + u_r.vel().norm());
    let coeff = lambda_max * ((h_lambda * h_lambda) / (beta * beta * a_min * a_min)).min(1.0);
    let du = *u_r - *u_l;
    FaceFlux {
        mass: coeff * du.rho,
        mom: du.mom * coeff,
        en: coeff * du.en,
    }
}
