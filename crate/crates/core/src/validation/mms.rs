//! Manufactured-solution problem: divergence-free solid and fluid velocity
//! fields on [-1,1]^2 with uniform densities, porosity, and internal energy,
//! plus the body forces and heat source that make them solve the governing
//! system. The solid stress follows the pseudo-Neo-Hookean model along the
//! exact trajectories; the flow map is a radius-preserving rotational shear,
//! which gives the deformation gradient in closed form (cross-checked
//! against direct integration of dF/dt = L F).

use crate::coupling::DragModel;
use crate::integrator::ExternalForcing;
use crate::math::{v2, M2, V2};
use crate::solid::Stress;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct MmsProblem {
    /// True solid grain density.
    pub rho_s: f64,
    /// True fluid density.
    pub rho_f: f64,
    /// Porosity.
    pub n0: f64,
    /// Specific internal energy of the fluid.
    pub eps_f: f64,
    /// Pseudo-Neo-Hookean shear and bulk moduli.
    pub g_mod: f64,
    pub k_mod: f64,
    pub r_gas: f64,
    pub gamma: f64,
    pub eta0: f64,
    pub d: f64,
}

impl MmsProblem {
    pub fn paper() -> MmsProblem {
        MmsProblem {
            rho_s: 1000.0,
            rho_f: 117.7,
            n0: 0.4,
            eps_f: 21.4,
            g_mod: 3.8e3,
            k_mod: 8.3e3,
            r_gas: 0.002871,
            gamma: 1.4,
            eta0: 2.0,
            d: 0.2,
        }
    }

    pub fn phi(&self) -> f64 {
        1.0 - self.n0
    }

    pub fn rho_bar_s(&self) -> f64 {
        self.phi() * self.rho_s
    }

    pub fn rho_bar_f(&self) -> f64 {
        self.n0 * self.rho_f
    }

    /// Effective mixture viscosity eta0 (1 + 5 phi / 2).
    pub fn eta_r(&self) -> f64 {
        self.eta0 * (1.0 + 2.5 * self.phi())
    }

    /// Drag coefficient K = 18 phi n eta0 / d^2 * F_CK(phi).
    pub fn drag_coeff(&self) -> f64 {
        let phi = self.phi();
        18.0 * phi * self.n0 * self.eta0 / (self.d * self.d)
            * DragModel::CarmanKozeny.f_hat(phi, 0.0)
    }

    pub fn a_coef(t: f64) -> f64 {
        -4.0 * t * t
    }

    pub fn b_coef(t: f64) -> f64 {
        4.0 * t * t
    }

    /// Time integral of B: beta(t) = 4 t^3 / 3 (total rotation scale).
    fn beta(t: f64) -> f64 {
        4.0 * t * t * t / 3.0
    }

    pub fn v_f(x: V2, t: f64) -> V2 {
        let a = Self::a_coef(t);
        v2(
            a * (x.x * x.x - 1.0).powi(2) * x.y * (x.y * x.y - 1.0),
            -a * x.x * (x.x * x.x - 1.0) * (x.y * x.y - 1.0).powi(2),
        )
    }

    pub fn dv_f_dt(x: V2, t: f64) -> V2 {
        let da = -8.0 * t;
        v2(
            da * (x.x * x.x - 1.0).powi(2) * x.y * (x.y * x.y - 1.0),
            -da * x.x * (x.x * x.x - 1.0) * (x.y * x.y - 1.0).powi(2),
        )
    }

    pub fn grad_v_f(x: V2, t: f64) -> M2 {
        let a = Self::a_coef(t);
        let (xx, yy) = (x.x, x.y);
        let dxx = 4.0 * a * xx * (xx * xx - 1.0) * yy * (yy * yy - 1.0);
        let dxy = a * (xx * xx - 1.0).powi(2) * (3.0 * yy * yy - 1.0);
        let dyx = -a * (3.0 * xx * xx - 1.0) * (yy * yy - 1.0).powi(2);
        let dyy = -4.0 * a * xx * yy * (xx * xx - 1.0) * (yy * yy - 1.0);
        M2::new(dxx, dxy, dyx, dyy)
    }

    pub fn laplacian_v_f(x: V2, t: f64) -> V2 {
        let a = Self::a_coef(t);
        let (xx, yy) = (x.x, x.y);
        v2(
            a * ((12.0 * xx * xx - 4.0) * yy * (yy * yy - 1.0)
                + 6.0 * yy * (xx * xx - 1.0).powi(2)),
            -a * (6.0 * xx * (yy * yy - 1.0).powi(2)
                + xx * (xx * xx - 1.0) * (12.0 * yy * yy - 4.0)),
        )
    }

    pub fn v_s(x: V2, t: f64) -> V2 {
        let r2 = x.norm_squared();
        if r2 > 1.0 {
            return V2::zeros();
        }
        let b = Self::b_coef(t);
        let phi = (r2 - 1.0).powi(2);
        v2(-b * x.y * phi, b * x.x * phi)
    }

    pub fn dv_s_dt(x: V2, t: f64) -> V2 {
        let r2 = x.norm_squared();
        if r2 > 1.0 {
            return V2::zeros();
        }
        let db = 8.0 * t;
        let phi = (r2 - 1.0).powi(2);
        v2(-db * x.y * phi, db * x.x * phi)
    }

    pub fn grad_v_s(x: V2, t: f64) -> M2 {
        let r2 = x.norm_squared();
        if r2 > 1.0 {
            return M2::zeros();
        }
        let b = Self::b_coef(t);
        let phi = (r2 - 1.0).powi(2);
        let dphi = 4.0 * (r2 - 1.0); // d(phi)/d(x_i) = dphi * x_i
        M2::new(
            -b * x.y * dphi * x.x,
            -b * (phi + x.y * dphi * x.y),
            b * (phi + x.x * dphi * x.x),
            b * x.x * dphi * x.y,
        )
    }

    fn rotation(theta: f64) -> M2 {
        M2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
    }

    /// Deformation gradient at spatial position x and time t. The motion is
    /// x = R(Theta(r) beta(t)) X with Theta(r) = (r^2-1)^2, so radii are
    /// material invariants and F = R + R' X (4 beta (r^2-1) X)^T in closed
    /// form; det F = 1 (isochoric).
    pub fn def_grad(x: V2, t: f64) -> M2 {
        let r2 = x.norm_squared();
        if r2 >= 1.0 {
            return M2::identity();
        }
        let beta = Self::beta(t);
        let theta = beta * (r2 - 1.0).powi(2);
        let rot = Self::rotation(theta);
        // Reference position: rotate back (radius preserved).
        let x_ref = Self::rotation(-theta) * x;
        let drot = M2::new(-theta.sin(), -theta.cos(), theta.cos(), -theta.sin());
        let grad_theta = x_ref * (4.0 * beta * (r2 - 1.0));
        rot + (drot * x_ref) * grad_theta.transpose()
    }

    /// Direct integration of dF/dt = grad(v_s) F along the exact circular
    /// trajectory through spatial position x at time t (RK4 in time).
    pub fn def_grad_ode(x: V2, t: f64, steps: usize) -> M2 {
        let r2 = x.norm_squared();
        if r2 >= 1.0 {
            return M2::identity();
        }
        let theta_total = Self::beta(t) * (r2 - 1.0).powi(2);
        let x_ref = Self::rotation(-theta_total) * x;
        let pos = |tau: f64| -> V2 {
            let th = Self::beta(tau) * (r2 - 1.0).powi(2);
            Self::rotation(th) * x_ref
        };
        let mut f = M2::identity();
        let dt = t / steps as f64;
        for k in 0..steps {
            let t0 = k as f64 * dt;
            let k1 = Self::grad_v_s(pos(t0), t0) * f;
            let k2 = Self::grad_v_s(pos(t0 + 0.5 * dt), t0 + 0.5 * dt) * (f + k1 * (0.5 * dt));
            let k3 = Self::grad_v_s(pos(t0 + 0.5 * dt), t0 + 0.5 * dt) * (f + k2 * (0.5 * dt));
            let k4 = Self::grad_v_s(pos(t0 + dt), t0 + dt) * (f + k3 * dt);
            f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        f
    }

    /// Pseudo-Neo-Hookean stress of the manufactured motion.
    pub fn stress(&self, x: V2, t: f64) -> Stress {
        let r2 = x.norm_squared();
        if r2 >= 1.0 {
            return Stress::default();
        }
        let f = Self::def_grad(x, t);
        let b = f * f.transpose();
        let j = f.determinant();
        let tr3 = (b[(0, 0)] + b[(1, 1)] + 1.0) / 3.0;
        let pk = self.k_mod * j.ln();
        Stress {
            xx: self.g_mod * (b[(0, 0)] - tr3) + pk,
            yy: self.g_mod * (b[(1, 1)] - tr3) + pk,
            xy: self.g_mod * b[(0, 1)],
            zz: self.g_mod * (1.0 - tr3) + pk,
        }
    }

    /// Divergence of the manufactured stress by fourth-order central
    /// differences of the closed form.
    pub fn div_stress(&self, x: V2, t: f64) -> V2 {
        let h = 5e-4;
        let sx = |xx: f64| self.stress(v2(xx, x.y), t);
        let sy = |yy: f64| self.stress(v2(x.x, yy), t);
        let d4 = |f: &dyn Fn(f64) -> Stress, at: f64| -> Stress {
            let mut out = Stress::default();
            out.add_scaled(&f(at + 2.0 * h), -1.0 / (12.0 * h));
            out.add_scaled(&f(at + h), 8.0 / (12.0 * h));
            out.add_scaled(&f(at - h), -8.0 / (12.0 * h));
            out.add_scaled(&f(at - 2.0 * h), 1.0 / (12.0 * h));
            out
        };
        let ddx = d4(&sx, x.x);
        let ddy = d4(&sy, x.y);
        v2(ddx.xx + ddy.xy, ddx.xy + ddy.yy)
    }

    /// Inter-phase drag density f_d = K (v_s - v_f).
    pub fn drag(&self, x: V2, t: f64) -> V2 {
        (Self::v_s(x, t) - Self::v_f(x, t)) * self.drag_coeff()
    }

    /// Solid body force: rho_bar_s Dv_s/Dt = div sigma + rho_bar_s b_s - f_d
    /// (+ the pressure-gradient term, zero for uniform fields).
    pub fn b_s(&self, x: V2, t: f64) -> V2 {
        let accel = Self::dv_s_dt(x, t) + Self::grad_v_s(x, t) * Self::v_s(x, t);
        let rho = self.rho_bar_s();
        accel - (self.div_stress(x, t) - self.drag(x, t)) / rho
    }

    /// Fluid body force: rho_bar_f dv_f/dt + convection = div tau + rho_bar_f
    /// b_f + f_d (pressure terms vanish for uniform fields; div v = 0 makes
    /// div tau = eta_r laplacian(v_f)).
    pub fn b_f(&self, x: V2, t: f64) -> V2 {
        let accel = Self::dv_f_dt(x, t) + Self::grad_v_f(x, t) * Self::v_f(x, t);
        let rho = self.rho_bar_f();
        accel - (Self::laplacian_v_f(x, t) * self.eta_r() + self.drag(x, t)) / rho
    }

    /// Volumetric heat source closing the energy equation for constant
    /// internal energy (residual form).
    pub fn q_f(&self, x: V2, t: f64) -> f64 {
        let v = Self::v_f(x, t);
        let g = Self::grad_v_f(x, t);
        let rho = self.rho_bar_f();
        let eta = self.eta_r();
        let tau = (g + g.transpose()) * eta;
        let div_tau = Self::laplacian_v_f(x, t) * eta;
        let tau_gv = tau[(0, 0)] * g[(0, 0)]
            + tau[(0, 1)] * g[(0, 1)]
            + tau[(1, 0)] * g[(1, 0)]
            + tau[(1, 1)] * g[(1, 1)];
        let vdot = Self::dv_f_dt(x, t);
        let grad_ke = g.transpose() * v;
        rho * v.dot(&vdot) + rho * v.dot(&grad_ke)
            - div_tau.dot(&v)
            - tau_gv
            - rho * self.b_f(x, t).dot(&v)
            - self.drag(x, t).dot(&Self::v_s(x, t))
    }

    pub fn forcing(&self) -> ExternalForcing {
        let p1 = *self;
        let p2 = *self;
        let p3 = *self;
        ExternalForcing {
            solid_accel: Arc::new(move |x, t| p1.b_s(x, t)),
            fluid_accel: Arc::new(move |x, t| p2.b_f(x, t)),
            fluid_heat: Arc::new(move |x, t| p3.q_f(x, t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(99)
    }

    #[test]
    fn velocity_fields_divergence_free_numerically() {
        let mut r = rng();
        let h = 1e-4;
        let mut checked = 0;
        while checked < 100 {
            let x = v2(r.gen_range(-0.95..0.95), r.gen_range(-0.95..0.95));
            // The solid field is C1 across r = 1; keep the centered stencil
            // off that kink.
            if (x.norm() - 1.0).abs() < 5.0 * h {
                continue;
            }
            checked += 1;
            let t = r.gen_range(0.1..1.3);
            for field in [MmsProblem::v_f, MmsProblem::v_s] {
                let dvxdx =
                    (field(x + v2(h, 0.0), t).x - field(x - v2(h, 0.0), t).x) / (2.0 * h);
                let dvydy =
                    (field(x + v2(0.0, h), t).y - field(x - v2(0.0, h), t).y) / (2.0 * h);
                assert!((dvxdx + dvydy).abs() < 1e-8, "div at {x:?}");
            }
        }
    }

    #[test]
    fn velocities_vanish_on_the_boundary() {
        let mut r = rng();
        for _ in 0..50 {
            let s = r.gen_range(-1.0..1.0);
            for x in [v2(1.0, s), v2(-1.0, s), v2(s, 1.0), v2(s, -1.0)] {
                assert!(MmsProblem::v_f(x, 0.8).norm() < 1e-14);
                assert!(MmsProblem::v_s(x, 0.8).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fluid_velocity_reference_value() {
        let v = MmsProblem::v_f(v2(0.5, 0.5), 1.0);
        assert!((v.x - 0.84375).abs() < 1e-12);
        assert!((v.y + 0.84375).abs() < 1e-12);
    }

    #[test]
    fn stationary_start_has_zero_forcing() {
        let p = MmsProblem::paper();
        let mut r = rng();
        for _ in 0..20 {
            let x = v2(r.gen_range(-0.9..0.9), r.gen_range(-0.9..0.9));
            assert!(p.b_s(x, 0.0).norm() < 1e-10);
            assert!(p.b_f(x, 0.0).norm() < 1e-12);
            assert!(p.q_f(x, 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut r = rng();
        let h = 1e-5;
        for _ in 0..40 {
            let x = v2(r.gen_range(-0.9..0.9), r.gen_range(-0.9..0.9));
            let t = r.gen_range(0.2..1.2);
            let g = MmsProblem::grad_v_f(x, t);
            let gs = MmsProblem::grad_v_s(x, t);
            for (col, dx) in [(0, v2(h, 0.0)), (1, v2(0.0, h))] {
                let fd = (MmsProblem::v_f(x + dx, t) - MmsProblem::v_f(x - dx, t)) / (2.0 * h);
                assert!((g.column(col) - fd).norm() < 1e-7);
                let fds = (MmsProblem::v_s(x + dx, t) - MmsProblem::v_s(x - dx, t)) / (2.0 * h);
                assert!((gs.column(col) - fds).norm() < 1e-7);
            }
            // Laplacian against 2nd-order FD.
            let hh = 1e-4;
            let lap_fd = (MmsProblem::v_f(x + v2(hh, 0.0), t)
                + MmsProblem::v_f(x - v2(hh, 0.0), t)
                + MmsProblem::v_f(x + v2(0.0, hh), t)
                + MmsProblem::v_f(x - v2(0.0, hh), t)
                - MmsProblem::v_f(x, t) * 4.0)
                / (hh * hh);
            assert!((MmsProblem::laplacian_v_f(x, t) - lap_fd).norm() < 1e-4);
        }
    }

    #[test]
    fn deformation_gradient_closed_form_matches_ode() {
        let mut r = rng();
        for _ in 0..15 {
            let x = v2(r.gen_range(-0.7..0.7), r.gen_range(-0.7..0.7));
            if x.norm() >= 0.98 {
                continue;
            }
            let t = r.gen_range(0.3..1.28);
            let f_closed = MmsProblem::def_grad(x, t);
            let f_ode = MmsProblem::def_grad_ode(x, t, 4000);
            assert!(
                (f_closed - f_ode).norm() < 1e-8 * f_closed.norm(),
                "at {x:?}, t={t}: {f_closed} vs {f_ode}"
            );
            // Isochoric motion: det F = 1.
            assert!((f_closed.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_source_matches_dissipation_closed_form() {
        // For constant internal energy the required heat extraction equals
        // the viscous dissipation plus the drag work mismatch:
        // q = -2 eta_r D:D - K |v_s - v_f|^2.
        let p = MmsProblem::paper();
        let mut r = rng();
        for _ in 0..40 {
            let x = v2(r.gen_range(-0.9..0.9), r.gen_range(-0.9..0.9));
            let t = r.gen_range(0.2..1.2);
            let g = MmsProblem::grad_v_f(x, t);
            let d = (g + g.transpose()) * 0.5;
            let ddot = d[(0, 0)].powi(2) + d[(1, 1)].powi(2) + 2.0 * d[(0, 1)].powi(2);
            let slip = MmsProblem::v_s(x, t) - MmsProblem::v_f(x, t);
            let expect = -2.0 * p.eta_r() * ddot - p.drag_coeff() * slip.norm_squared();
            let got = p.q_f(x, t);
            assert!(
                (got - expect).abs() < 1e-9 * expect.abs().max(1.0),
                "q mismatch at {x:?}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn momentum_residual_oracle_for_fluid_forcing() {
        // Substitute the manufactured fields and computed b_f into a
        // high-order discretization of the fluid momentum equation; the
        // residual must vanish to 1e-6 relative.
        let p = MmsProblem::paper();
        let rho = p.rho_bar_f();
        let eta = p.eta_r();
        let mut r = rng();
        let hx = 2e-3;
        let ht = 1e-3;
        for _ in 0..20 {
            let x = v2(r.gen_range(-0.85..0.85), r.gen_range(-0.85..0.85));
            let t = r.gen_range(0.2..1.2);
            // d(rho v)/dt by 4th-order FD in time.
            let vt = |tt: f64| MmsProblem::v_f(x, tt) * rho;
            let dmom_dt = (vt(t - 2.0 * ht) - vt(t + 2.0 * ht) + (vt(t + ht) - vt(t - ht)) * 8.0)
                / (12.0 * ht);
            // div(rho v (x) v) by 4th-order FD in space.
            let mom_flux = |xx: V2, a: usize, b: usize| -> f64 {
                let v = MmsProblem::v_f(xx, t);
                rho * v[a] * v[b]
            };
            let d4 = |f: &dyn Fn(V2) -> f64, dir: usize| -> f64 {
                let dx = if dir == 0 { v2(hx, 0.0) } else { v2(0.0, hx) };
                (f(x - dx * 2.0) - f(x + dx * 2.0) + (f(x + dx) - f(x - dx)) * 8.0) / (12.0 * hx)
            };
            let conv = v2(
                d4(&|xx| mom_flux(xx, 0, 0), 0) + d4(&|xx| mom_flux(xx, 0, 1), 1),
                d4(&|xx| mom_flux(xx, 1, 0), 0) + d4(&|xx| mom_flux(xx, 1, 1), 1),
            );
            // div tau = eta lap(v) for this divergence-free field, by
            // 4th-order second-difference stencils.
            let lap = |f: &dyn Fn(V2) -> f64| -> f64 {
                let mut acc = 0.0;
                for dx in [v2(hx, 0.0), v2(0.0, hx)] {
                    acc += (-f(x + dx * 2.0) + 16.0 * f(x + dx) - 30.0 * f(x)
                        + 16.0 * f(x - dx)
                        - f(x - dx * 2.0))
                        / (12.0 * hx * hx);
                }
                acc
            };
            let div_tau = v2(
                eta * lap(&|xx| MmsProblem::v_f(xx, t).x),
                eta * lap(&|xx| MmsProblem::v_f(xx, t).y),
            );
            let residual =
                dmom_dt + conv - div_tau - p.b_f(x, t) * rho - p.drag(x, t);
            let scale = (p.b_f(x, t) * rho).norm().max(dmom_dt.norm()).max(1e-3);
            assert!(
                residual.norm() < 1e-6 * scale.max(1.0),
                "residual {:.3e} (scale {scale:.3e}) at {x:?}, t={t}",
                residual.norm()
            );
        }
    }
}
