use mqssd_core::bench::{plan_offsets, TrialRecord, WorkloadSpec, KIB, MIB};
use mqssd_core::calibration::{derive_per_k, fit_rational, FitOptions};
use mqssd_core::lsm::{self, Fanout, LsmLayout};
use mqssd_core::{AffineCosts, AffineParams, DamParams, MqssdProfile, OpKind, PageGeometry, PdamParams, RationalFn};
use proptest::prelude::*;

const B: u64 = 4096;

fn geometry() -> PageGeometry {
    PageGeometry::new(B, 1 << 36, 1 << 30).unwrap()
}

fn op() -> impl Strategy<Value = OpKind> {
    prop_oneof![Just(OpKind::Read), Just(OpKind::Write)]
}

proptest! {
    #[test]
    fn dam_is_flat(read in 0.1f64..100.0, write in 0.1f64..100.0, op in op()) {
        let g = geometry();
        let dam = DamParams::new(read, write).unwrap();
        prop_assert_eq!(dam.throughput(op, &g), B as f64 / dam.page_cost(op));
    }

    #[test]
    fn pdam_saturates_at_p(cost in 0.1f64..100.0, p in 1u32..64, k in 1u32..256, op in op()) {
        let g = geometry();
        let pdam = PdamParams::new(cost, cost * 2.0, p).unwrap();
        let at_k = pdam.throughput(op, &g, k).unwrap();
        let at_p = pdam.throughput(op, &g, p).unwrap();
        if k >= p {
            prop_assert_eq!(at_k, at_p);
        } else {
            prop_assert!(at_k < at_p);
        }
    }

    #[test]
    fn affine_per_worker_ignores_k(
        s in 1.0f64..1e4, beta in 0.1f64..50.0, r in 1u64..256, k in 1u32..128, op in op()
    ) {
        let g = geometry();
        let c = AffineCosts::new(s, beta).unwrap();
        let affine = AffineParams::new(c, c).unwrap();
        let n_w = 256 * B;
        let one = affine.throughput(op, &g, r, 1, n_w).unwrap();
        let many = affine.throughput(op, &g, r, k, n_w).unwrap() / f64::from(k);
        prop_assert!((one - many).abs() <= 1e-12 * one);
        let more = affine.throughput(op, &g, r + 1, 1, n_w).unwrap();
        prop_assert!(more < one);
    }

    #[test]
    fn constant_mqssd_collapses_to_affine(
        s in 1.0f64..1e4, beta in 0.1f64..50.0, t in 1.0f64..1e4, alpha in 0.1f64..50.0,
        r in 1u64..256, k in 1u32..64, op in op()
    ) {
        let g = geometry();
        let write = AffineCosts::new(s, beta).unwrap();
        let read = AffineCosts::new(t, alpha).unwrap();
        let mq = MqssdProfile::constant(write, read, g, 64).unwrap();
        let affine = AffineParams::new(read, write).unwrap();
        let n_w = 256 * B;
        prop_assert_eq!(
            mq.worker_elapsed(op, r, k, n_w).unwrap(),
            affine.worker_elapsed(op, &g, r, n_w).unwrap()
        );
        prop_assert_eq!(mq.throughput(op, r, 1, n_w).unwrap(), affine.throughput(op, &g, r, 1, n_w).unwrap());
        let per_worker = mq.throughput(op, r, k, n_w).unwrap() / f64::from(k);
        let affine_one = affine.throughput(op, &g, r, 1, n_w).unwrap();
        prop_assert!((per_worker - affine_one).abs() <= 4.0 * f64::EPSILON * affine_one);
    }

    #[test]
    fn mqssd_decreases_in_r(
        a in 10.0f64..1e4, da in 0.01f64..1.0, b in 0.5f64..20.0, r in 1u64..255, k in 1u32..64, op in op()
    ) {
        let setup = RationalFn::new(vec![a, 0.0, 0.0], vec![1.0, da, 0.0], 64).unwrap();
        let transfer = RationalFn::new(vec![b, 0.0, 0.0], vec![1.0, da, 0.0], 64).unwrap();
        let beta = RationalFn::new(vec![b, 0.0, 0.0, 0.0], vec![1.0, da, 0.0, 0.0], 64).unwrap();
        let mq = MqssdProfile::new(setup.clone(), beta, setup, transfer, geometry()).unwrap();
        let n_w = 256 * B;
        prop_assert!(mq.throughput(op, r + 1, k, n_w).unwrap() < mq.throughput(op, r, k, n_w).unwrap());
    }

    /// Scaling every elapsed time scales both derived costs by the same factor.
    #[test]
    fn derive_per_k_is_scale_consistent(
        setup in 1.0f64..1e3, transfer in 0.5f64..20.0, scale in 0.01f64..100.0,
        noise in proptest::collection::vec(0.95f64..1.05, 4)
    ) {
        let n_w = 1024 * B;
        let rs = [1u64, 16, 128, 1024];
        let trials = |factor: f64| -> Vec<TrialRecord> {
            rs.iter()
                .zip(&noise)
                .map(|(&r, e)| {
                    let elapsed = (r as f64 * setup + 1024.0 * transfer) * e * factor;
                    TrialRecord::completed("p", OpKind::Read, 4, r, n_w, B, elapsed, 0, 0)
                })
                .collect()
        };
        // Heavy noise can push the intercept negative; that must then fail
        // at every scale.
        let (base, scaled) = match (derive_per_k(&trials(1.0), B), derive_per_k(&trials(scale), B)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(_), Err(_)) => return Ok(()),
            (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
        };
        prop_assert_eq!(base.slope_clamped, scaled.slope_clamped);
        prop_assert!((scaled.setup - scale * base.setup).abs() <= 1e-9 * scale * base.setup.max(1e-9));
        prop_assert!((scaled.transfer - scale * base.transfer).abs() <= 1e-9 * scale * base.transfer);
        prop_assert!((scaled.r_squared - base.r_squared).abs() <= 1e-9);
    }

    #[test]
    fn plans_are_disjoint_and_replayable(
        file_pages in 64u64..4096, k in 1u32..16, pw_pages in 1u64..64, r_pick in 0.0f64..1.0, seed: u64, rep in 0u32..5
    ) {
        let per_worker = pw_pages * B;
        prop_assume!(u64::from(k) * per_worker <= file_pages * B);
        let spec = WorkloadSpec { file_size: file_pages * B, per_worker_bytes: per_worker, seed, ..WorkloadSpec::desk_scale() };
        let r = 1 + (r_pick * (pw_pages - 1) as f64) as u64;
        let plan = plan_offsets(&spec, k, r, rep).unwrap();
        plan.validate(B, per_worker, spec.file_size).unwrap();
        let mut owner = vec![u32::MAX; file_pages as usize];
        for (j, chunks) in plan.workers.iter().enumerate() {
            prop_assert_eq!(chunks.len() as u64, r);
            prop_assert_eq!(chunks.iter().map(|c| c.len).sum::<u64>(), per_worker);
            for c in chunks {
                prop_assert!(c.offset % B == 0 && c.len % B == 0 && c.len > 0);
                for p in c.offset / B..(c.offset + c.len) / B {
                    prop_assert_eq!(owner[p as usize], u32::MAX);
                    owner[p as usize] = j as u32;
                }
            }
        }
        prop_assert_eq!(plan_offsets(&spec, k, r, rep).unwrap(), plan);
    }

    #[test]
    fn rational_fit_ignores_point_order(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let base = RationalFn::new(vec![300.0, 20.0, 1.0], vec![1.0, 0.3, 0.02], 128).unwrap();
        let pts: Vec<(u32, f64)> = (0..8).map(|i| (1u32 << i, base.eval(1 << i).unwrap())).collect();
        let shuffled: Vec<(u32, f64)> = perm.iter().map(|&i| pts[i]).collect();
        let opts = FitOptions::default();
        let a = fit_rational(&pts, (2, 2), &opts).unwrap();
        let b = fit_rational(&shuffled, (2, 2), &opts).unwrap();
        prop_assert_eq!(a.function, b.function);
    }

    #[test]
    fn single_level_queries_beat_leveled(f in 2u32..33, c in 1u32..16, k in 1u32..64, t in 0.5f64..100.0, alpha in 0.01f64..10.0) {
        let read = AffineCosts::new(t, alpha).unwrap();
        let p = MqssdProfile::constant(read, read, geometry(), 64).unwrap();
        let layout = LsmLayout::leveled(f, 64 * MIB, c, 4 * KIB, 1 << 36, 128).unwrap();
        let single = layout.with_fanout(Fanout::SingleLevel).unwrap();
        prop_assert!(lsm::sl_query_cost(&p, k, &single).unwrap() < lsm::query_cost(&layout, &p, k).unwrap());
        prop_assert_eq!(lsm::query_cost(&single, &p, k).unwrap(), lsm::sl_query_cost(&p, k, &single).unwrap());
    }

    #[test]
    fn file_rewrites_are_linear(x in 1u64..1000, k in 1u32..64) {
        let one = AffineCosts::new(3.0, 0.5).unwrap();
        let p = MqssdProfile::constant(one, one, geometry(), 64).unwrap();
        let layout = LsmLayout::leveled(8, 64 * MIB, 8, 4 * KIB, 1 << 36, 128).unwrap();
        let single = lsm::file_rw_cost(1, &layout, &p, k).unwrap();
        prop_assert!((lsm::file_rw_cost(x, &layout, &p, k).unwrap() - x as f64 * single).abs() <= 1e-12 * x as f64 * single);
    }
}
