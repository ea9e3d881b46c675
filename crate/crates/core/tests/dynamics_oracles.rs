mod support;

use gaitmod_core::dynamics::{ground_reaction_wrench, gravity_torques, inverse_dynamics, zmp};
use gaitmod_core::kinematics::center_of_mass;
use gaitmod_core::model::{Configuration, MechanismModel};
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use rand::{rngs::StdRng, SeedableRng};
use support::*;

#[test]
fn chain_torques_match_lagrangian_oracle() {
    let model = three_link_chain();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let cfg = random_configuration(&mut rng, 3, 1.5);
        let tau = inverse_dynamics(&model, &cfg).tau;
        let oracle = lagrangian_torques(&model, &cfg);
        let err = relative_error(&tau, &oracle);
        assert!(err <= 1e-5, "relative error {err:e} at {cfg:?}");
    }
}

#[test]
fn gravity_torques_are_the_potential_gradient() {
    let model = reference();
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..20 {
        let q = random_configuration(&mut rng, 20, 0.6).q;
        let g = gravity_torques(model, &q).tau;
        let h = 1e-6;
        let grad: Vec<f64> = (0..20)
            .map(|k| {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                (potential(model, &qp) - potential(model, &qm)) / (2.0 * h)
            })
            .collect();
        let err = relative_error(&g, &grad);
        assert!(err <= 1e-7, "relative error {err:e}");
    }
}

/// Ground wrench about the origin from the rate of change of total
/// momentum along the path q + qd t + qdd t^2 / 2.
fn momentum_wrench(model: &MechanismModel, cfg: &Configuration) -> (Vector3<f64>, Vector3<f64>) {
    let at = |t: f64| -> Vec<f64> {
        (0..cfg.q.len())
            .map(|k| cfg.q[k] + cfg.qd[k] * t + 0.5 * cfg.qdd[k] * t * t)
            .collect()
    };
    let state = |t: f64| {
        let frames = |q: &[f64]| -> Vec<(nalgebra::Matrix3<f64>, Vector3<f64>)> {
            naive_link_frames(model, q)
                .into_iter()
                .zip(&model.links)
                .map(|((r, o), l)| (r, o + r * l.com))
                .collect()
        };
        let h = 1e-5;
        let (f0, fp, fm) = (frames(&at(t)), frames(&at(t + h)), frames(&at(t - h)));
        let mut p = Vector3::zeros();
        let mut l = Vector3::zeros();
        for k in 0..f0.len() {
            let m = model.links[k].mass;
            let v = (fp[k].1 - fm[k].1) / (2.0 * h);
            let w = (fp[k].0 - fm[k].0) / (2.0 * h) * f0[k].0.transpose();
            let omega = Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]);
            let iw = f0[k].0 * model.links[k].inertia * f0[k].0.transpose();
            p += v * m;
            l += f0[k].1.cross(&(v * m)) + iw * omega;
        }
        (p, l)
    };
    let h = 1e-4;
    let ((pp, lp), (pm, lm)) = (state(h), state(-h));
    let g = Vector3::new(0.0, 0.0, model.gravity);
    let mut f = (pp - pm) / (2.0 * h);
    let mut moment = (lp - lm) / (2.0 * h);
    for ((r, o), link) in naive_link_frames(model, &cfg.q).into_iter().zip(&model.links) {
        let c = o + r * link.com;
        f += g * link.mass;
        moment += c.cross(&(g * link.mass));
    }
    (f, moment)
}

#[test]
fn ground_wrench_matches_momentum_balance() {
    let model = reference();
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..20 {
        let cfg = random_configuration(&mut rng, 20, 0.5);
        let w = ground_reaction_wrench(model, &cfg, Vector2::zeros());
        let (f, m) = momentum_wrench(model, &cfg);
        let scale = model.weight();
        assert!((w.force - f).amax() <= 1e-5 * scale, "{:?} vs {:?}", w.force, f);
        assert!((w.moment - m).amax() <= 1e-5 * scale, "{:?} vs {:?}", w.moment, m);
    }
}

/// ZMP by bisection: the horizontal moment about (x, y) is monotone in
/// each coordinate when the vertical force is positive.
fn bisect_zmp(model: &MechanismModel, cfg: &Configuration) -> Vector2<f64> {
    let my = |x: f64| ground_reaction_wrench(model, cfg, Vector2::new(x, 0.0)).moment.y;
    let mx = |y: f64| ground_reaction_wrench(model, cfg, Vector2::new(0.0, y)).moment.x;
    let solve = |f: &dyn Fn(f64) -> f64| {
        let (mut lo, mut hi) = (-50.0, 50.0);
        let s = f(hi).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Vector2::new(solve(&my), solve(&mx))
}

#[test]
fn zmp_matches_bisection_oracle() {
    let model = reference();
    let mut rng = StdRng::seed_from_u64(14);
    let mut checked = 0;
    for _ in 0..30 {
        let cfg = random_configuration(&mut rng, 20, 0.4);
        let z = zmp(model, &cfg);
        if !z.valid {
            continue;
        }
        checked += 1;
        let b = bisect_zmp(model, &cfg);
        assert!((z.position - b).norm() < 1e-9, "{:?} vs {:?}", z.position, b);
    }
    assert!(checked > 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn static_zmp_is_com_projection(q in prop::collection::vec(-0.6f64..0.6, 20)) {
        let model = reference();
        let z = zmp(model, &Configuration::at_rest(q.clone()));
        let c = center_of_mass(model, &q);
        prop_assert!(z.valid);
        prop_assert!((z.position - c.xy()).norm() < 1e-9);
    }

    #[test]
    fn moment_about_zmp_vanishes(seed in any::<u64>()) {
        let model = reference();
        let mut rng = StdRng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, 20, 0.6);
        let z = zmp(model, &cfg);
        prop_assume!(z.valid);
        let m = ground_reaction_wrench(model, &cfg, z.position).moment;
        let bound = 1e-9 * model.weight();
        prop_assert!(m.x.abs() <= bound && m.y.abs() <= bound, "{m:?}");
    }

    #[test]
    fn torques_split_into_gravity_and_motion(seed in any::<u64>(), c in 0.2f64..3.0) {
        // Scaling velocities by c and accelerations by c^2 scales the
        // non-gravity part by c^2.
        let model = reference();
        let mut rng = StdRng::seed_from_u64(seed);
        let cfg = random_configuration(&mut rng, 20, 0.6);
        let scaled = Configuration {
            q: cfg.q.clone(),
            qd: cfg.qd.iter().map(|v| v * c).collect(),
            qdd: cfg.qdd.iter().map(|v| v * c * c).collect(),
        };
        let g = gravity_torques(model, &cfg.q).tau;
        let t = inverse_dynamics(model, &cfg).tau;
        let ts = inverse_dynamics(model, &scaled).tau;
        let expect: Vec<f64> = (0..20).map(|k| c * c * (t[k] - g[k]) + g[k]).collect();
        prop_assert!(relative_error(&ts, &expect) <= 1e-9);
    }
}
