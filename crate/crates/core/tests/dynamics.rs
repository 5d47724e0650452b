use std::f64::consts::PI;

use cargame_core::dynamics::{
    body_twist, caster_disturbance, normalize_angle, pose_step, ChassisConfig, Layout, Pose,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pose() -> impl Strategy<Value = Pose> {
    (-10.0f64..10.0, -10.0f64..10.0, -PI..PI).prop_map(|(x, y, th)| Pose::new(x, y, th))
}

fn omega() -> impl Strategy<Value = f64> {
    prop_oneof![
        -6.0f64..6.0,
        -1e-6f64..1e-6,
        Just(0.0),
        Just(1e-9),
        Just(-1e-9),
    ]
}

fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

proptest! {
    #[test]
    fn straightness_is_exact(w in 0.0f64..30.0, steps in 1usize..2000, dt in 0.001f64..0.05) {
        let c = ChassisConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = Pose::new(0.5, 1.5, 0.0);
        for _ in 0..steps {
            let (v, om) = body_twist(w, w, &c);
            let om = om + caster_disturbance(&c, &mut rng);
            p = pose_step(&p, v, om, dt);
        }
        prop_assert_eq!(p.y, 1.5);
        prop_assert_eq!(p.theta, 0.0);
    }

    #[test]
    fn arc_consistency(p in pose(), v in -1.0f64..1.0, om in omega(), dt in 0.0001f64..1.0) {
        let whole = pose_step(&p, v, om, dt);
        let half = pose_step(&pose_step(&p, v, om, dt / 2.0), v, om, dt / 2.0);
        prop_assert!((whole.x - half.x).abs() < 1e-12, "x {} vs {}", whole.x, half.x);
        prop_assert!((whole.y - half.y).abs() < 1e-12, "y {} vs {}", whole.y, half.y);
        prop_assert!(angle_diff(whole.theta, half.theta) < 1e-12);
    }

    #[test]
    fn theta_stays_normalized(p in pose(), v in -1.0f64..1.0, om in -50.0f64..50.0, dt in 0.001f64..10.0) {
        let q = pose_step(&p, v, om, dt);
        prop_assert!(q.theta > -PI && q.theta <= PI);
    }

    #[test]
    fn faster_right_wheel_turns_left(wl in -30.0f64..30.0, dw in 0.01f64..30.0, dt in 0.001f64..0.05) {
        let c = ChassisConfig::default();
        let (v, om) = body_twist(wl, wl + dw, &c);
        prop_assert!(om > 0.0);
        let p = Pose::new(0.0, 0.0, 0.0);
        prop_assert!(pose_step(&p, v, om, dt).theta > p.theta);
    }

    #[test]
    fn rotation_symmetry(p in pose(), phi in -PI..PI, v in -1.0f64..1.0, om in omega(), dt in 0.001f64..2.0) {
        let a = pose_step(&p, v, om, dt);
        let rotated = Pose::new(p.x, p.y, p.theta + phi);
        let b = pose_step(&rotated, v, om, dt);
        let (dx, dy) = (a.x - p.x, a.y - p.y);
        let (ex, ey) = (dx * phi.cos() - dy * phi.sin(), dx * phi.sin() + dy * phi.cos());
        prop_assert!((b.x - p.x - ex).abs() < 1e-9);
        prop_assert!((b.y - p.y - ey).abs() < 1e-9);
        prop_assert!(angle_diff(b.theta, a.theta + phi) < 1e-9);
    }

    #[test]
    fn branch_continuity(p in pose(), v in -1.0f64..1.0, dt in 0.001f64..1.0) {
        let a = pose_step(&p, v, 0.0, dt);
        let b = pose_step(&p, v, 1e-12, dt);
        let c = pose_step(&p, v, 2e-9, dt);
        prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        prop_assert!((a.x - c.x).abs() < 1e-9 && (a.y - c.y).abs() < 1e-9);
    }
}

#[test]
fn quarter_arc() {
    let p = pose_step(&Pose::new(0.0, 0.0, 0.0), 0.5, 1.0, PI / 2.0);
    assert!((p.x - 0.5).abs() < 1e-12);
    assert!((p.y - 0.5).abs() < 1e-12);
    assert!((p.theta - PI / 2.0).abs() < 1e-12);
}

#[test]
fn locked_and_four_wheel_never_disturb() {
    for layout in [Layout::FourWheel, Layout::TwoWheelCaster { locked: true }] {
        let c = ChassisConfig {
            layout,
            ..ChassisConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| caster_disturbance(&c, &mut rng) == 0.0));
    }
}
