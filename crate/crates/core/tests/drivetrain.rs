use cargame_core::drivetrain::{
    battery_step, clamp_drive, demand_current, hbridge_decode, motor_step, steady_state_omega,
    BatteryState, Direction, MotorChannelCommand, MotorParams, MotorState, SurfaceModel,
};
use cargame_core::firmware::{HBridgeState, PinLevel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn level() -> impl Strategy<Value = PinLevel> {
    prop_oneof![Just(PinLevel::High), Just(PinLevel::Low)]
}

fn bridge() -> impl Strategy<Value = HBridgeState> {
    (level(), level(), level(), level(), any::<u8>(), any::<u8>()).prop_map(
        |(in1, in2, in3, in4, en_a, en_b)| HBridgeState {
            in1,
            in2,
            in3,
            in4,
            en_a,
            en_b,
        },
    )
}

fn driven(duty: u8, forward: bool) -> MotorChannelCommand {
    MotorChannelCommand {
        direction: if forward {
            Direction::Forward
        } else {
            Direction::Reverse
        },
        duty,
    }
}

fn battery() -> impl Strategy<Value = BatteryState> {
    (0.05f64..5.0, 0.0f64..=1.0, prop::bool::ANY).prop_map(|(i_max, soc, aa)| {
        let mut b = if aa {
            BatteryState::aa()
        } else {
            BatteryState::li_ion()
        };
        b.i_max = i_max;
        b.charge = soc * b.charge_full;
        b
    })
}

proptest! {
    #[test]
    fn decode_is_total_and_consistent(pins in bridge()) {
        let (l, r) = hbridge_decode(&pins);
        prop_assert_eq!(l.duty, pins.en_a);
        prop_assert_eq!(r.duty, pins.en_b);
        for c in [l, r] {
            if !c.direction.is_driven() {
                prop_assert_eq!(c.effective_duty(), 0);
            }
        }
    }

    #[test]
    fn clamp_keeps_ratio_and_never_raises(
        dl in any::<u8>(), dr in any::<u8>(),
        fl in prop::bool::ANY, fr in prop::bool::ANY,
        b in battery(), per_side in 1u32..=2,
    ) {
        let params = MotorParams::default();
        let (l, r) = (driven(dl, fl), driven(dr, fr));
        let (cl, cr) = clamp_drive(l, r, &b, &params, per_side);
        prop_assert!(cl.duty <= dl && cr.duty <= dr);
        prop_assert_eq!(cl.direction, l.direction);
        prop_assert_eq!(cr.direction, r.direction);
        // Truncation loses under one duty step per channel.
        let demand = demand_current(&l, &r, &params, per_side);
        if demand > b.i_max {
            let s = b.i_max / demand;
            prop_assert!((f64::from(cl.duty) - f64::from(dl) * s).abs() < 1.0);
            prop_assert!((f64::from(cr.duty) - f64::from(dr) * s).abs() < 1.0);
            prop_assert!(demand_current(&cl, &cr, &params, per_side) <= b.i_max + 1e-12);
        } else {
            prop_assert_eq!((cl, cr), (l, r));
        }
    }

    #[test]
    fn steady_state_is_monotone(
        d1 in any::<u8>(), d2 in any::<u8>(),
        v1 in 0.0f64..9.0, v2 in 0.0f64..9.0,
        m1 in 0.0f64..1.0, m2 in 0.0f64..1.0,
    ) {
        let p = MotorParams::default();
        let surf = |mu_roll| SurfaceModel { name: "t".into(), mu_roll, roughness_sigma: 0.0 };
        let w = |d, v, mu| steady_state_omega(&driven(d, true), v, &surf(mu), &p).abs();
        let (dlo, dhi) = (d1.min(d2), d1.max(d2));
        let (vlo, vhi) = (v1.min(v2), v1.max(v2));
        let (mlo, mhi) = (m1.min(m2), m1.max(m2));
        prop_assert!(w(dlo, v1, m1) <= w(dhi, v1, m1));
        prop_assert!(w(d1, vlo, m1) <= w(d1, vhi, m1));
        prop_assert!(w(d1, v1, mhi) <= w(d1, v1, mlo));
    }

    #[test]
    fn speed_stays_bounded(
        pins in proptest::collection::vec(bridge(), 1..50),
        v in 0.0f64..20.0,
        rough in prop::bool::ANY,
        seed in any::<u64>(),
    ) {
        let p = MotorParams::default();
        let surface = if rough { SurfaceModel::rough() } else { SurfaceModel::smooth() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MotorState::default();
        for b in pins {
            let (l, _) = hbridge_decode(&b);
            m = motor_step(m, &l, v, &surface, &p, 0.01, &mut rng);
            prop_assert!(m.omega.abs() <= p.omega_max);
        }
    }

    #[test]
    fn smooth_drivetrain_ignores_rng(d in any::<u8>(), v in 0.0f64..9.0, s1 in any::<u64>(), s2 in any::<u64>()) {
        let p = MotorParams::default();
        let mut a = ChaCha8Rng::seed_from_u64(s1);
        let mut b = ChaCha8Rng::seed_from_u64(s2);
        let (mut ma, mut mb) = (MotorState::default(), MotorState::default());
        for _ in 0..20 {
            ma = motor_step(ma, &driven(d, true), v, &SurfaceModel::smooth(), &p, 0.01, &mut a);
            mb = motor_step(mb, &driven(d, true), v, &SurfaceModel::smooth(), &p, 0.01, &mut b);
            prop_assert_eq!(ma.omega.to_bits(), mb.omega.to_bits());
        }
    }

    #[test]
    fn rough_drivetrain_reproducible(d in any::<u8>(), seed in any::<u64>()) {
        let p = MotorParams::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = MotorState::default();
            (0..50)
                .map(|_| {
                    m = motor_step(m, &driven(d, true), 6.0, &SurfaceModel::rough(), &p, 0.01, &mut rng);
                    m.omega.to_bits()
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn charge_never_increases(b in battery(), currents in proptest::collection::vec(-1.0f64..10.0, 1..100), dt in 0.001f64..0.05) {
        let mut b = b;
        for i in currents {
            let next = battery_step(&b, i, dt);
            prop_assert!(next.charge <= b.charge);
            prop_assert!(next.charge >= 0.0 && next.charge <= next.charge_full);
            prop_assert!(next.terminal_voltage(i.max(0.0)) >= 0.0);
            b = next;
        }
    }
}
