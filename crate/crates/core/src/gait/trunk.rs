//! Semi-inverse trunk synthesis: leg motion is prescribed, two trunk DOFs
//! are driven so the reaction moment about the ZMP target has no
//! horizontal component at every sample.
//!
//! The trunk equation is unstable forward in time (an inverted pendulum),
//! so it is solved as a boundary-value problem over the whole half-step:
//! trunk angles at all samples are unknowns, interior samples use central
//! differences for velocity and acceleration, and Newton's method drives
//! the moment residuals and the boundary conditions to zero together.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{mirror_relabel, HalfStepTrajectory};
use crate::dynamics::{wrench_about, zmp};
use crate::error::{GaitError, Result};
use crate::model::{joint, Configuration, MechanismModel};

/// Boundary conditions of the trunk motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrunkBoundary {
    /// The trunk state at the end mirror-matches the state at the start, so
    /// the trunk motion continues smoothly into the other half-step.
    #[default]
    Periodic,
    /// Upright trunk at rest at the first sample.
    RestStart,
    /// Upright trunk at the first and last samples.
    UprightEnds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrunkConfig {
    /// The two compensating DOFs (joint ids).
    pub dofs: [usize; 2],
    pub boundary: TrunkBoundary,
    /// Largest allowed |ZMP - target| at any sample, m.
    pub tol_zmp: f64,
    pub max_iterations: usize,
}

impl Default for TrunkConfig {
    fn default() -> Self {
        Self {
            dofs: [joint::WAIST_ROLL, joint::WAIST_PITCH],
            boundary: TrunkBoundary::default(),
            tol_zmp: 2e-3,
            max_iterations: 50,
        }
    }
}

/// Accelerations of the two DOFs zeroing M_x and M_y about `target` for the
/// given positions and velocities (the moment is affine in them).
fn balancing_accelerations(
    model: &MechanismModel,
    cfg: &mut Configuration,
    dofs: [usize; 2],
    target: Vector2<f64>,
) -> Option<Vector2<f64>> {
    let [a, b] = dofs.map(joint::idx);
    cfg.qdd[a] = 0.0;
    cfg.qdd[b] = 0.0;
    let m0 = wrench_about(model, cfg, target).1.xy();
    cfg.qdd[a] = 1.0;
    let ma = wrench_about(model, cfg, target).1.xy() - m0;
    cfg.qdd[a] = 0.0;
    cfg.qdd[b] = 1.0;
    let mb = wrench_about(model, cfg, target).1.xy() - m0;
    cfg.qdd[b] = 0.0;
    let u = Matrix2::new(ma.x, mb.x, ma.y, mb.y).lu().solve(&(-m0))?;
    u.iter().all(|v| v.is_finite()).then_some(u)
}

struct Problem<'a> {
    model: &'a MechanismModel,
    legs: &'a HalfStepTrajectory,
    target: Vector2<f64>,
    idx: [usize; 2],
    boundary: TrunkBoundary,
    /// Mirror-relabel signs of the two DOFs.
    mirror: Vector2<f64>,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.legs.samples.len() - 1
    }

    fn theta(x: &DVector<f64>, k: usize) -> Vector2<f64> {
        Vector2::new(x[2 * k], x[2 * k + 1])
    }

    /// Horizontal moment at interior sample `k` given the three trunk
    /// states around it.
    fn interior_moment(&self, k: usize, prev: Vector2<f64>, cur: Vector2<f64>, next: Vector2<f64>) -> Vector2<f64> {
        let dt = self.legs.dt;
        let mut cfg = self.legs.samples[k].clone();
        let vel = (next - prev) / (2.0 * dt);
        let acc = (next - 2.0 * cur + prev) / (dt * dt);
        for c in 0..2 {
            cfg.q[self.idx[c]] = cur[c];
            cfg.qd[self.idx[c]] = vel[c];
            cfg.qdd[self.idx[c]] = acc[c];
        }
        wrench_about(self.model, &cfg, self.target).1.xy()
    }

    /// Linear boundary rows as (coefficient, sample) terms per DOF component,
    /// each row summing to zero.
    fn boundary_rows(&self) -> Vec<Vec<(f64, usize, usize)>> {
        let n = self.n();
        let mut rows = Vec::new();
        for c in 0..2 {
            let s = self.mirror[c];
            match self.boundary {
                TrunkBoundary::Periodic => {
                    rows.push(vec![(1.0, n, c), (-s, 0, c)]);
                    rows.push(vec![
                        (3.0, n, c),
                        (-4.0, n - 1, c),
                        (1.0, n - 2, c),
                        (3.0 * s, 0, c),
                        (-4.0 * s, 1, c),
                        (s, 2, c),
                    ]);
                }
                TrunkBoundary::RestStart => {
                    rows.push(vec![(1.0, 0, c)]);
                    rows.push(vec![(-3.0, 0, c), (4.0, 1, c), (-1.0, 2, c)]);
                }
                TrunkBoundary::UprightEnds => {
                    rows.push(vec![(1.0, 0, c)]);
                    rows.push(vec![(1.0, n, c)]);
                }
            }
        }
        rows
    }

    /// Residual vector and its Jacobian.
    fn linearize(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let dim = 2 * (n + 1);
        let mut r = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        let h = 1e-7;
        for k in 1..n {
            let states = [Self::theta(x, k - 1), Self::theta(x, k), Self::theta(x, k + 1)];
            let m0 = self.interior_moment(k, states[0], states[1], states[2]);
            let row = 2 * (k - 1);
            r[row] = m0.x;
            r[row + 1] = m0.y;
            for (slot, sample) in [k - 1, k, k + 1].into_iter().enumerate() {
                for c in 0..2 {
                    let mut s = states;
                    s[slot][c] += h;
                    let dm = (self.interior_moment(k, s[0], s[1], s[2]) - m0) / h;
                    jac[(row, 2 * sample + c)] = dm.x;
                    jac[(row + 1, 2 * sample + c)] = dm.y;
                }
            }
        }
        // Boundary rows carry the weight scale so the system stays balanced.
        let scale = self.model.weight();
        for (i, terms) in self.boundary_rows().into_iter().enumerate() {
            let row = 2 * (n - 1) + i;
            for (coef, sample, c) in terms {
                r[row] += scale * coef * x[2 * sample + c];
                jac[(row, 2 * sample + c)] += scale * coef;
            }
        }
        (r, jac)
    }

    fn solve(&self, max_iterations: usize) -> Result<DVector<f64>> {
        let n = self.n();
        let mut x = DVector::zeros(2 * (n + 1));
        let tol = 1e-9 * self.model.weight();
        for _ in 0..max_iterations {
            let (r, jac) = self.linearize(&x);
            if r.amax() <= tol {
                return Ok(x);
            }
            let step = jac.lu().solve(&(-&r)).ok_or_else(|| self.failure(&r))?;
            x += step;
        }
        let (r, _) = self.linearize(&x);
        if r.amax() <= tol {
            Ok(x)
        } else {
            Err(self.failure(&r))
        }
    }

    fn failure(&self, r: &DVector<f64>) -> GaitError {
        let n = self.n();
        let (k, _) = (1..n)
            .map(|k| (k, r[2 * (k - 1)].abs().max(r[2 * (k - 1) + 1].abs())))
            .fold((1, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        GaitError::TrunkSolver {
            sample: k,
            mx: r[2 * (k - 1)].abs(),
            my: r[2 * (k - 1) + 1].abs(),
        }
    }
}

/// Adds trunk motion to `legs` so the ZMP stays on `zmp_target`. Joints
/// other than the configured DOFs are left untouched.
pub fn semi_inverse_trunk(
    model: &MechanismModel,
    legs: &HalfStepTrajectory,
    zmp_target: Vector2<f64>,
    config: &TrunkConfig,
) -> Result<HalfStepTrajectory> {
    legs.check()?;
    let idx = config.dofs.map(joint::idx);
    let mirror = {
        let mut probe = vec![0.0; model.dof()];
        probe[idx[0]] = 1.0;
        probe[idx[1]] = 2.0;
        let m = mirror_relabel(model, &probe);
        Vector2::new(m[idx[0]], 0.5 * m[idx[1]])
    };
    if mirror.iter().any(|s| s.abs() != 1.0) {
        return Err(GaitError::Trajectory(format!(
            "trunk DOFs {:?} do not map onto themselves under mirroring",
            config.dofs
        )));
    }
    let problem = Problem {
        model,
        legs,
        target: zmp_target,
        idx,
        boundary: config.boundary,
        mirror,
    };
    let x = problem.solve(config.max_iterations)?;

    let n = problem.n();
    let dt = legs.dt;
    let mut out = legs.clone();
    for k in 0..=n {
        let th = Problem::theta(&x, k);
        let vel = if k == 0 {
            (-3.0 * th + 4.0 * Problem::theta(&x, 1) - Problem::theta(&x, 2)) / (2.0 * dt)
        } else if k == n {
            (3.0 * th - 4.0 * Problem::theta(&x, n - 1) + Problem::theta(&x, n - 2)) / (2.0 * dt)
        } else {
            (Problem::theta(&x, k + 1) - Problem::theta(&x, k - 1)) / (2.0 * dt)
        };
        let cfg = &mut out.samples[k];
        for c in 0..2 {
            cfg.q[idx[c]] = th[c];
            cfg.qd[idx[c]] = vel[c];
        }
        let acc = if k == 0 || k == n {
            balancing_accelerations(model, cfg, config.dofs, zmp_target).ok_or_else(|| {
                let m = wrench_about(model, cfg, zmp_target).1;
                GaitError::TrunkSolver { sample: k, mx: m.x.abs(), my: m.y.abs() }
            })?
        } else {
            (Problem::theta(&x, k + 1) - 2.0 * th + Problem::theta(&x, k - 1)) / (dt * dt)
        };
        for c in 0..2 {
            cfg.qdd[idx[c]] = acc[c];
        }
    }

    for (k, cfg) in out.samples.iter().enumerate() {
        let z = zmp(model, cfg);
        if !z.valid || (z.position - zmp_target).norm() > config.tol_zmp {
            let m = wrench_about(model, cfg, zmp_target).1;
            return Err(GaitError::TrunkSolver {
                sample: k,
                mx: m.x.abs(),
                my: m.y.abs(),
            });
        }
    }
    Ok(out)
}
