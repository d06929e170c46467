//! Acceptance suite: one test per criterion, each printing a single
//! PASS line (a failure panics, which the harness reports as FAIL).
//! Budgets assume a single CPU core; tests run serially there.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use scandp::cloud::PointCloud;
use scandp::diffusion::{
    forward_diffuse, make_schedule, sample_action_array, NoisePredictor, DEFAULT_BETA_END,
    DEFAULT_BETA_START, DEFAULT_DIFFUSION_STEPS,
};
use scandp::expert::{expert_poses, generate_expert_demo};
use scandp::geom::{Pose, PoseHorizon};
use scandp::grid::{logistic, CellIndex, OccupancyGrid};
use scandp::harness::{
    coverage, coverage_brute, run_episode, PolicyKind, ScenarioConfig,
};
use scandp::mesh::make_uv_sphere;
use scandp::optimizer::{
    bubble_filter, extract_viewpoints, optimize, polyline_length, reconstruction_loss,
};
use scandp::render::CameraModel;
use scandp::train::{train_policy, TrainConfig};

fn elapsed_ok(start: Instant, budget_s: f64, what: &str) {
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < budget_s, "{what} took {secs:.1}s, budget {budget_s}s");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_occupancy_log_odds_algebra() {
    let start = Instant::now();

    // Three hit scans and one pass-through (miss) scan on one cell.
    let cell_point = Point3::new(0.11, 0.11, 0.11);
    let camera = Point3::new(-0.35, 0.0, 0.0);
    let hit_scan = PointCloud::new(vec![cell_point]);
    // A return beyond the cell along the same ray marks the cell as free.
    let beyond = camera + (cell_point - camera) * 1.3;
    let miss_scan = PointCloud::new(vec![beyond]);

    let fused = |order: &[bool], grid: &mut OccupancyGrid| {
        for &hit in order {
            let scan = if hit { &hit_scan } else { &miss_scan };
            grid.integrate_scan(&camera, scan);
        }
    };

    let mut grid = OccupancyGrid::default_workspace();
    let idx = grid.world_to_cell(&cell_point);
    fused(&[true, true, true, false], &mut grid);
    let l = grid.log_odds(idx);
    assert!((l - 2.15).abs() < 1e-9, "log-odds {l} != 2.15");
    let p = grid.probability_of(idx);
    assert!((p - 0.8957).abs() < 1e-4, "probability {p} != 0.8957");
    assert!((p - logistic(2.15)).abs() < 1e-12);

    // Order independence across shuffled interleavings.
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut order = vec![true, true, true, false];
    for _ in 0..100 {
        order.shuffle(&mut rng);
        let mut g = OccupancyGrid::default_workspace();
        fused(&order, &mut g);
        assert!((g.log_odds(idx) - 2.15).abs() < 1e-9, "order {order:?}");
    }

    elapsed_ok(start, 1.0, "criterion 1");
    println!("PASS criterion 1: occupancy update algebra (3 hits + 1 miss -> 2.15, order-independent)");
}

// ---------------------------------------------------------------- 2

/// Minimum distance from the segment [a, b] to the closed unit cube of a
/// cell, by dense sampling in cell units (error below 0.005 cells).
fn segment_cell_distance(a: &Point3<f64>, b: &Point3<f64>, cell: CellIndex) -> f64 {
    let lo = [cell.i as f64 - 0.5, cell.j as f64 - 0.5, cell.k as f64 - 0.5];
    let n = 4000;
    let mut best = f64::INFINITY;
    for s in 0..=n {
        let t = s as f64 / n as f64;
        let p = a + (b - a) * t;
        let mut d2 = 0.0;
        for axis in 0..3 {
            let gap = (lo[axis] - p[axis]).max(p[axis] - (lo[axis] + 1.0)).max(0.0);
            d2 += gap * gap;
        }
        best = best.min(d2.sqrt());
    }
    best
}

#[test]
fn criterion_02_bresenham_against_supercover_oracle() {
    let start = Instant::now();
    let grid = OccupancyGrid::default_workspace();
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for case in 0..1000 {
        let a = Point3::new(
            rng.gen_range(-0.39..0.39),
            rng.gen_range(-0.39..0.39),
            rng.gen_range(-0.39..0.39),
        );
        let b = Point3::new(
            rng.gen_range(-0.39..0.39),
            rng.gen_range(-0.39..0.39),
            rng.gen_range(-0.39..0.39),
        );
        let chain = grid.bresenham3d(&a, &b);
        assert_eq!(chain[0], grid.world_to_cell(&a), "case {case}: start cell");
        assert_eq!(
            *chain.last().unwrap(),
            grid.world_to_cell(&b),
            "case {case}: end cell"
        );
        // 26-connectivity: consecutive cells differ by one Chebyshev step.
        for w in chain.windows(2) {
            let d = (w[0].i - w[1].i)
                .abs()
                .max((w[0].j - w[1].j).abs())
                .max((w[0].k - w[1].k).abs());
            assert_eq!(d, 1, "case {case}: non-adjacent step {w:?}");
        }
        // No repeats.
        let unique: HashSet<_> = chain.iter().collect();
        assert_eq!(unique.len(), chain.len(), "case {case}: repeated cell");
        // Supercover oracle: every visited cell lies on (or touches) the
        // segment between the endpoint cell centers, in cell units.
        let ca = grid.world_to_cell(&a);
        let cb = grid.world_to_cell(&b);
        let pa = Point3::new(ca.i as f64, ca.j as f64, ca.k as f64);
        let pb = Point3::new(cb.i as f64, cb.j as f64, cb.k as f64);
        for cell in &chain {
            let d = segment_cell_distance(&pa, &pb, *cell);
            assert!(
                d < 0.01,
                "case {case}: cell {cell:?} is {d:.4} cells away from the segment"
            );
        }
    }
    elapsed_ok(start, 5.0, "criterion 2");
    println!("PASS criterion 2: Bresenham traversal matches dense supercover oracle (1000 segments)");
}

// ---------------------------------------------------------------- 3

/// Brute force: smallest increasing index chain from first to last pose
/// where every skipped pose is within eta of its bridging segment.
fn brute_force_min_chain(horizon: &PoseHorizon, eta: f64) -> usize {
    let n = horizon.len();
    let seg_ok = |i: usize, j: usize| -> bool {
        let a = horizon[i].translation;
        let b = horizon[j].translation;
        (i + 1..j).all(|m| {
            let p = horizon[m].translation;
            let seg = b - a;
            let len2 = seg.norm_squared();
            let t = if len2 > 0.0 {
                ((p - a).dot(&seg) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (p - (a + seg * t)).norm() <= eta
        })
    };
    let interior = n - 2;
    let mut best = usize::MAX;
    for mask in 0..(1u32 << interior) {
        let mut chain = vec![0usize];
        for b in 0..interior {
            if mask & (1 << b) != 0 {
                chain.push(b + 1);
            }
        }
        chain.push(n - 1);
        if chain.len() >= best {
            continue;
        }
        if chain.windows(2).all(|w| seg_ok(w[0], w[1])) {
            best = chain.len();
        }
    }
    best
}

#[test]
fn criterion_03_viewpoint_dp_is_minimal() {
    let start = Instant::now();
    let eta = 0.02;
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for case in 0..100 {
        let len = rng.gen_range(3..=12);
        // Random walk with occasional near-collinear runs so both dense and
        // sparse solutions occur.
        let mut horizon: PoseHorizon = Vec::with_capacity(len);
        let mut p = Point3::new(0.0, 0.0, 0.0);
        let mut dir = Vector3::new(1.0, 0.0, 0.0);
        for _ in 0..len {
            if rng.gen_bool(0.4) {
                dir = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
            }
            let wobble = Vector3::new(
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
            );
            p += dir * 0.04 + wobble;
            horizon.push(Pose::new(p, UnitQuaternion::identity()));
        }
        let opt = extract_viewpoints(&horizon, eta);
        let brute = brute_force_min_chain(&horizon, eta);
        assert_eq!(
            opt.indices.len(),
            brute,
            "case {case}: DP kept {} poses, brute force {brute}",
            opt.indices.len()
        );
        assert!(
            opt.loss <= eta + 1e-12,
            "case {case}: loss {} exceeds eta",
            opt.loss
        );
        assert!(reconstruction_loss(&opt.poses, &horizon) <= eta + 1e-12);
    }
    elapsed_ok(start, 30.0, "criterion 3");
    println!("PASS criterion 3: viewpoint extraction matches brute-force minimum cardinality (100 horizons)");
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_bubble_filter_matches_exhaustive_scan() {
    let start = Instant::now();
    let r_min = 0.1;
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    for case in 0..100 {
        let mut grid = OccupancyGrid::default_workspace();
        let n_occ = rng.gen_range(0..40);
        for _ in 0..n_occ {
            let idx = CellIndex::new(
                rng.gen_range(0..40),
                rng.gen_range(0..40),
                rng.gen_range(0..40),
            );
            grid.set_log_odds(idx, 3.0); // p ~ 0.95 > kappa
        }
        let horizon: PoseHorizon = (0..16)
            .map(|_| {
                Pose::new(
                    Point3::new(
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(-0.4..0.4),
                    ),
                    UnitQuaternion::identity(),
                )
            })
            .collect();
        let occupied: Vec<Point3<f64>> = grid
            .occupied_cells(0.9)
            .into_iter()
            .map(|i| grid.cell_center(i))
            .collect();
        let (kept, reports) = bubble_filter(&horizon, &grid, 0.9, r_min);
        let mut expected_kept = 0usize;
        for (pose, report) in horizon.iter().zip(&reports) {
            let d = occupied
                .iter()
                .map(|c| (c - pose.translation).norm())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(report.kept, d >= r_min, "case {case}: kept flag vs exhaustive");
            assert!((report.radius - d).abs() < 1e-12 || (d.is_infinite() && report.radius.is_infinite()));
            if d >= r_min {
                expected_kept += 1;
            }
        }
        assert_eq!(kept.len(), expected_kept, "case {case}");
        for r in reports.iter().filter(|r| r.kept) {
            assert!(r.radius >= r_min);
        }
    }
    elapsed_ok(start, 10.0, "criterion 4");
    println!("PASS criterion 4: bubble filter agrees with exhaustive occupied-cell scan (100 pairs)");
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_ddpm_properties_and_2d_toy() {
    let start = Instant::now();

    // Schedule identity at every k.
    let schedule = make_schedule(DEFAULT_DIFFUSION_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
        .unwrap();
    for k in 0..schedule.steps {
        let id = schedule.alpha_bars[k].powi(2) + schedule.beta_bars[k].powi(2);
        assert!((id - 1.0).abs() < 1e-12, "k={k}: alpha_bar^2+beta_bar^2={id}");
    }

    // K=1 oracle inversion: with the exact noise as prediction, one reverse
    // step recovers a0.
    let one = make_schedule(1, 0.04, 0.04).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a0 = Array1::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let eps = Array1::from_vec(vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]);
        let noisy = forward_diffuse(&one, &a0, 1, &eps).unwrap();
        // Reverse update with sigma_1 = 0: a0_hat = alpha_1 (a1 - gamma_1 eps).
        let alpha = 1.0 / (1.0 - one.betas[0]).sqrt();
        let gamma = one.betas[0] / one.beta_bars[0];
        let rec = (&noisy - &(eps.clone() * gamma)) * alpha;
        for i in 0..2 {
            assert!((rec[i] - a0[i]).abs() < 1e-4, "K=1 inversion error {}", (rec[i] - a0[i]).abs());
        }
    }

    // Finite-difference gradient agreement on a parameter slice.
    {
        use scandp::nn::Mlp;
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let mut mlp = Mlp::init(&[6, 16, 3], &mut rng);
        let x = Array1::from_vec((0..6).map(|i| 0.1 * i as f64 - 0.3).collect());
        let target = Array1::from_vec(vec![0.2, -0.4, 0.7]);
        let loss_of = |m: &Mlp| {
            let y = m.forward(&x);
            (&y - &target).mapv(|v| v * v).sum()
        };
        let (cache, y) = mlp.forward_cached(&x);
        let mut grad = mlp.grad_zeros();
        let dy = (&y - &target) * 2.0;
        mlp.backward(&cache, &dy, &mut grad);
        let h = 1e-6;
        for (li, wi) in [(0usize, 7usize), (0, 30), (1, 5), (1, 40)] {
            let slice = mlp.layers[li].weight.as_slice_mut().unwrap();
            let orig = slice[wi];
            slice[wi] = orig + h;
            let up = loss_of(&mlp);
            mlp.layers[li].weight.as_slice_mut().unwrap()[wi] = orig - h;
            let down = loss_of(&mlp);
            mlp.layers[li].weight.as_slice_mut().unwrap()[wi] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad.layers[li].weight.as_slice().unwrap()[wi];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-12);
            assert!(rel < 1e-4, "layer {li} w{wi}: fd {fd} vs analytic {an}");
        }
    }

    // 2D two-Gaussian toy distribution: means at (+-0.7, -+0.7), std 0.1.
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    let toy_schedule = make_schedule(25, 2e-3, 0.35).unwrap();
    let mut predictor = NoisePredictor::init(2, 16, 0, &[128, 128, 128], &mut rng);
    let cond = Array1::zeros(0);
    let draw = |rng: &mut ChaCha12Rng| -> Array1<f64> {
        let (cx, cy) = if rng.gen_bool(0.5) { (0.7, -0.7) } else { (-0.7, 0.7) };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        Array1::from_vec(vec![cx + 0.1 * ex, cy + 0.1 * ey])
    };
    let steps = 16_000;
    let batch = 32;
    for step in 0..steps {
        let mut grad = predictor.mlp.grad_zeros();
        for _ in 0..batch {
            let a0 = draw(&mut rng);
            let k = rng.gen_range(1..=toy_schedule.steps);
            let eps = Array1::from_vec(vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]);
            let noisy = forward_diffuse(&toy_schedule, &a0, k, &eps).unwrap();
            let x = predictor.input_vector(&noisy, k, &cond);
            let (cache, pred) = predictor.mlp.forward_cached(&x);
            let dy = (&pred - &eps) * (2.0 / (2.0 * batch as f64));
            predictor.mlp.backward(&cache, &dy, &mut grad);
        }
        let lr = if step * 4 < steps * 3 { 2e-2 } else { 4e-3 };
        predictor.mlp.sgd_step(&grad, lr);
    }
    let n = 10_000;
    let mut first = 0usize;
    let mut near = 0usize;
    for _ in 0..n {
        let v = sample_action_array(&predictor, &toy_schedule, &cond, &mut rng).unwrap();
        if v[0] - v[1] > 0.0 {
            first += 1;
        }
        let d1 = ((v[0] - 0.7).powi(2) + (v[1] + 0.7).powi(2)).sqrt();
        let d2 = ((v[0] + 0.7).powi(2) + (v[1] - 0.7).powi(2)).sqrt();
        if d1.min(d2) < 0.35 {
            near += 1;
        }
    }
    let frac = first as f64 / n as f64;
    assert!(
        (frac - 0.5).abs() <= 0.05,
        "component mass {frac} deviates more than 5% from 0.5"
    );
    assert!(
        near as f64 / n as f64 > 0.75,
        "only {} of {n} samples near a component",
        near
    );

    elapsed_ok(start, 300.0, "criterion 5");
    println!(
        "PASS criterion 5: DDPM schedule identity, K=1 inversion, FD gradients, 2D toy mass {:.3}",
        frac
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_06_coverage_metric_properties() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut random_cloud = |n: usize, span: f64| {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-span..span),
                        rng.gen_range(-span..span),
                        rng.gen_range(-span..span),
                    )
                })
                .collect(),
        )
    };

    // Self coverage is exactly 1; empty scan is exactly 0.
    let gt = random_cloud(800, 0.2);
    assert_eq!(coverage(&gt, &gt, 0.01), 1.0);
    assert_eq!(coverage(&gt, &PointCloud::new(vec![]), 0.01), 0.0);

    // Equality with brute force on clouds up to 1e3 points.
    for _ in 0..10 {
        let g = random_cloud(1000, 0.06);
        let s = random_cloud(700, 0.06);
        for eps in [0.005, 0.01, 0.02] {
            assert_eq!(coverage(&g, &s, eps), coverage_brute(&g, &s, eps));
        }
    }

    // Monotone in the scan cloud.
    let g = random_cloud(600, 0.05);
    let s = random_cloud(900, 0.05);
    let mut prev = -1.0;
    for n in [0usize, 100, 300, 600, 900] {
        let sub = PointCloud::new(s.points[..n].to_vec());
        let c = coverage(&g, &sub, 0.01);
        assert!(c >= prev, "coverage not monotone: {c} < {prev}");
        prev = c;
    }

    elapsed_ok(start, 5.0, "criterion 6");
    println!("PASS criterion 6: coverage metric (self=1, empty=0, brute-force equality, monotone)");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_expert_replay_covers_sphere() {
    let start = Instant::now();
    let mut cfg = ScenarioConfig::minimal("builtin:sphere", PolicyKind::ExpertReplay);
    cfg.steps = 500;
    let mesh = make_uv_sphere(0.12, 32, 64);
    let record = run_episode(&cfg, &mesh, None, 0, 0).unwrap().record;
    assert!(
        record.coverage_final >= 0.99,
        "expert replay coverage {} < 0.99",
        record.coverage_final
    );
    elapsed_ok(start, 600.0, "criterion 7");
    println!(
        "PASS criterion 7: expert replay on sphere, T=500, coverage {:.4} >= 0.99",
        record.coverage_final
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_trained_policy_desk_scale_run() {
    let start = Instant::now();
    let mesh = make_uv_sphere(0.12, 32, 64);
    let cam = CameraModel::default_sensor();
    let demos: Vec<_> = (0..3)
        .map(|s| generate_expert_demo(&mesh, &cam, s, 200, "sphere").unwrap())
        .collect();
    let (policy, report) = train_policy(&demos, &TrainConfig::default()).unwrap();
    assert!(report.final_loss.is_finite());

    let mut cfg = ScenarioConfig::minimal("builtin:sphere", PolicyKind::Scandp);
    cfg.steps = 1500;
    let mut cov_policy = Vec::new();
    let mut cov_expert = Vec::new();
    let mut cov_random = Vec::new();
    for seed in 0..3u64 {
        cfg.policy = PolicyKind::Scandp;
        cov_policy.push(
            run_episode(&cfg, &mesh, Some(&policy), seed, 0)
                .unwrap()
                .record
                .coverage_final,
        );
        cfg.policy = PolicyKind::ExpertReplay;
        cov_expert.push(run_episode(&cfg, &mesh, None, seed, 0).unwrap().record.coverage_final);
        cfg.policy = PolicyKind::Random;
        cov_random.push(run_episode(&cfg, &mesh, None, seed, 0).unwrap().record.coverage_final);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mp, me, mr) = (mean(&cov_policy), mean(&cov_expert), mean(&cov_random));
    assert!(
        mp >= me - 0.10,
        "trained policy {mp:.3} more than 10 points below expert replay {me:.3} \
         (per-seed policy {cov_policy:?}, expert {cov_expert:?})"
    );
    assert!(
        mp >= mr,
        "trained policy {mp:.3} below random baseline {mr:.3} (per-seed {cov_random:?})"
    );
    elapsed_ok(start, 3600.0, "criterion 8");
    println!(
        "PASS criterion 8: trained policy coverage {mp:.3} vs expert {me:.3} and random {mr:.3} over 3 seeds"
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_path_optimization_shortens_jittered_horizons() {
    let start = Instant::now();
    let mesh = make_uv_sphere(0.12, 16, 32);
    let grid = OccupancyGrid::default_workspace();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut reductions = Vec::new();
    for case in 0..100u64 {
        // Oversample the expert arc so the horizon carries redundant motion,
        // then jitter each pose; optimization should recover near-chords.
        let base = expert_poses(&mesh, case, 16).unwrap();
        let dense: PoseHorizon = (0..64)
            .map(|i| scandp::optimizer::interpolate(&base, i as f64 / 63.0))
            .collect();
        let jittered: PoseHorizon = dense
            .iter()
            .map(|p| {
                let n = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * 0.005;
                Pose::new(p.translation + n, p.rotation)
            })
            .collect();
        let before = polyline_length(&jittered);
        let opt = optimize(&jittered, &grid, 0.9, 0.1, 0.02);
        assert!(!opt.all_unsafe);
        let after = polyline_length(&opt.poses);
        assert!(
            after < before,
            "case {case}: optimized length {after} not strictly below {before}"
        );
        reductions.push(1.0 - after / before);
    }
    reductions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = reductions[reductions.len() / 2];
    assert!(
        median >= 0.10,
        "median path reduction {median:.3} below 10%"
    );
    elapsed_ok(start, 60.0, "criterion 9");
    println!(
        "PASS criterion 9: optimization strictly shortens 100 jittered horizons, median reduction {:.1}%",
        median * 100.0
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_noise_robustness() {
    let start = Instant::now();
    let mesh = make_uv_sphere(0.12, 32, 64);
    let mut cfg = ScenarioConfig::minimal("builtin:sphere", PolicyKind::ExpertReplay);
    cfg.steps = 500;
    let clean = run_episode(&cfg, &mesh, None, 0, 0).unwrap().record.coverage_final;
    for std in [0.01, 0.1] {
        cfg.noise_std = std;
        let noisy = run_episode(&cfg, &mesh, None, 0, 0).unwrap().record.coverage_final;
        assert!(
            noisy >= clean - 0.10,
            "noise std {std}: coverage {noisy:.3} degrades more than 10 points from clean {clean:.3}"
        );
    }
    elapsed_ok(start, 1200.0, "criterion 10");
    println!("PASS criterion 10: coverage under depth noise (0.01, 0.1) within 10 points of clean {clean:.4}");
}

// ---------------------------------------------------------------- 11

fn brute_force_open_tour(points: &[Point3<f64>], start: &Point3<f64>) -> f64 {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm over all permutations.
    fn heap(k: usize, order: &mut Vec<usize>, points: &[Point3<f64>], start: &Point3<f64>, best: &mut f64) {
        if k == 1 {
            let mut len = (points[order[0]] - start).norm();
            for w in order.windows(2) {
                len += (points[w[1]] - points[w[0]]).norm();
            }
            if len < *best {
                *best = len;
            }
            return;
        }
        for i in 0..k {
            heap(k - 1, order, points, start, best);
            if k % 2 == 0 {
                order.swap(i, k - 1);
            } else {
                order.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut order, points, start, &mut best);
    best
}

#[test]
fn criterion_11_tsp_ordering_near_optimal() {
    use scandp::baselines::{open_tour_length, ViewpointKind, ViewpointSet};
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let mut exact = 0usize;
    for case in 0..100 {
        let pts: Vec<Point3<f64>> = (0..9)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                )
            })
            .collect();
        let origin = Point3::new(
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        );
        let set = ViewpointSet {
            poses: pts
                .iter()
                .map(|p| Pose::new(*p, UnitQuaternion::identity()))
                .collect(),
            kind: ViewpointKind::Random,
            seed: case as u64,
        };
        let start_pose = Pose::new(origin, UnitQuaternion::identity());
        // tsp_order returns the start pose as the first element.
        let tour = scandp::baselines::tsp_order(&set, &start_pose);
        assert_eq!(tour[0].translation, origin);
        let ours = polyline_length(&tour);
        let optimum = brute_force_open_tour(&pts, &origin);
        assert!(
            ours <= 1.1 * optimum + 1e-12,
            "case {case}: tour {ours:.4} exceeds 1.1x optimum {optimum:.4}"
        );
        if ours <= optimum + 1e-9 {
            exact += 1;
        }
        // Consistency of the helper used by the episode runner.
        let order: Vec<usize> = tour[1..]
            .iter()
            .map(|p| {
                pts.iter()
                    .position(|q| (q - p.translation).norm() < 1e-12)
                    .unwrap()
            })
            .collect();
        assert!((open_tour_length(&set, &order, &start_pose) - ours).abs() < 1e-9);
    }
    assert!(exact >= 80, "only {exact}/100 instances solved exactly");
    elapsed_ok(start, 30.0, "criterion 11");
    println!("PASS criterion 11: TSP tours within 1.1x optimum on all instances, exact on {exact}/100");
}
