//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the report is always printed.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctph_core::classifier::svm::{kkt_violation, rbf, solve_dual, squared_distances};
use ctph_core::classifier::{hyperparam_search, svm_train, Label, SearchConfig};
use ctph_core::filtration::{build_lower_star, build_vr_from_points, sort_simplices};
use ctph_core::imaging::{mask_region, GrayImage};
use ctph_core::persistence::{
    compute_persistence, lsf_zero_diagram, oracle_persistence, vr_persistence, PdPoint,
    PersistenceDiagram,
};
use ctph_core::pipeline::{
    ablate, evaluate, ingest, run_features, train, PipelineConfig, Predictor,
};
use ctph_core::riemannian::{
    pd_to_density, pga_fit, sphere_distance, sphere_exp, sphere_log, sqrt_embed, GridSpec,
    SpherePoint, DEFAULT_VARIANCE,
};
use ctph_core::synthetic::{generate, generate_dataset, write_dataset};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Intervals = Vec<(f64, f64)>;

fn points_of(d: &PersistenceDiagram) -> Intervals {
    d.canonical()
        .points
        .iter()
        .map(|p| (p.birth, p.death))
        .collect()
}

fn random_cloud(rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let n = rng.random_range(1..=10);
    (0..n)
        .map(|_| [0, 1, 2].map(|_| rng.random_range(-10.0..10.0f64).round() / 2.0))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    for case in 0..100 {
        let pts = random_cloud(&mut rng);
        let complex = build_vr_from_points(&pts, 3, f64::INFINITY).and_then(sort_simplices);
        let result = complex.and_then(|c| {
            let explicit = compute_persistence(&c, 2)?;
            let oracle = oracle_persistence(&c)?;
            let implicit = vr_persistence(&pts, 2, f64::INFINITY)?;
            Ok((0..=2).all(|q| {
                let o = oracle
                    .get(q)
                    .cloned()
                    .unwrap_or_else(|| PersistenceDiagram::empty(q));
                explicit[q].same_multiset(&o) && implicit[q].same_multiset(&o)
            }))
        });
        if !matches!(result, Ok(true)) {
            mismatches.push(format!("vr#{case}"));
        }
    }
    for case in 0..100 {
        let (h, w) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let img = GrayImage::from_fn(w, h, |_, _| rng.random_range(0..8u8) * 30).unwrap();
        let result = sort_simplices(build_lower_star(&img)).and_then(|c| {
            let oracle = oracle_persistence(&c)?;
            Ok(compute_persistence(&c, 0)?[0].same_multiset(&oracle[0])
                && lsf_zero_diagram(&img).same_multiset(&oracle[0]))
        });
        if !matches!(result, Ok(true)) {
            mismatches.push(format!("lsf#{case}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(120),
        format!("200 cases, mismatches {mismatches:?}, {elapsed:.1?}"),
    )
}

fn criterion_2() -> Outcome {
    let (n, r) = (12, 3.0);
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            [r * t.cos(), r * t.sin(), 0.0]
        })
        .collect();
    let run = || -> ctph_core::Result<(Intervals, Intervals)> {
        let engine = vr_persistence(&pts, 1, f64::INFINITY)?;
        let complex = sort_simplices(build_vr_from_points(&pts, 2, f64::INFINITY)?)?;
        Ok((
            points_of(&engine[1]),
            points_of(&oracle_persistence(&complex)?[1]),
        ))
    };
    match run() {
        Ok((h1, oracle)) => {
            let pers: Vec<f64> = h1.iter().map(|(b, d)| d - b).collect();
            let top = pers.iter().cloned().fold(0.0, f64::max);
            let dominant = pers.iter().filter(|&&p| p == top).count() == 1
                && pers.iter().all(|&p| p == top || 3.0 * p < top);
            let matches = h1.len() == oracle.len()
                && h1
                    .iter()
                    .zip(&oracle)
                    .all(|(a, b)| (a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-9);
            outcome(
                dominant && matches,
                format!("H1 = {h1:?}, oracle = {oracle:?}"),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

/// Plain elder-rule sweep over pixels in value order with 8-adjacency.
fn hand_sweep(img: &GrayImage) -> Vec<(f64, f64)> {
    let (w, h) = (img.width(), img.height());
    let mut order: Vec<usize> = (0..w * h).collect();
    order.sort_by_key(|&i| (img.data()[i], i));
    let mut parent: Vec<Option<usize>> = vec![None; w * h];
    let mut birth = vec![0.0; w * h];
    fn root(parent: &mut [Option<usize>], mut x: usize) -> usize {
        while let Some(p) = parent[x] {
            if p == x {
                return x;
            }
            x = p;
        }
        x
    }
    let mut out = Vec::new();
    for &i in &order {
        let v = img.data()[i] as f64;
        parent[i] = Some(i);
        birth[i] = v;
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nr, nc) = (r + dr, c + dc);
                if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if parent[j].is_none() {
                    continue;
                }
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a == b {
                    continue;
                }
                let (old, young) = if (birth[a], a) <= (birth[b], b) {
                    (a, b)
                } else {
                    (b, a)
                };
                if birth[young] < v {
                    out.push((birth[young], v));
                }
                parent[young] = Some(old);
            }
        }
    }
    let roots: Vec<usize> = (0..w * h).filter(|&i| parent[i] == Some(i)).collect();
    out.extend(roots.iter().map(|&r| (birth[r], f64::INFINITY)));
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

fn criterion_3() -> Outcome {
    let path = [10, 50, 100, 20, 60, 120, 30];
    let img = GrayImage::from_fn(7, 7, |r, c| if r == 3 { path[c] } else { 200 }).unwrap();
    let got = points_of(&lsf_zero_diagram(&img));
    let swept = hand_sweep(&img);
    let designed = vec![(10.0, f64::INFINITY), (20.0, 100.0), (30.0, 120.0)];
    outcome(
        got == swept && got == designed,
        format!("LSF H0 = {got:?}, hand sweep = {swept:?}"),
    )
}

fn random_diagram(rng: &mut ChaCha8Rng) -> PersistenceDiagram {
    let mut pd = PersistenceDiagram::empty(1);
    for _ in 0..rng.random_range(0..12) {
        let b = rng.random_range(0.0..60.0);
        pd.points
            .push(PdPoint::new(b, b + rng.random_range(0.0..40.0)));
    }
    pd
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut points = Vec::with_capacity(1000);
    let (mut worst_norm, mut worst_integral) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let density = match pd_to_density(&random_diagram(&mut rng), &grid, DEFAULT_VARIANCE) {
            Ok(d) => d,
            Err(e) => return outcome(false, e.to_string()),
        };
        worst_integral = worst_integral.max((density.integral() - 1.0).abs());
        let p = match sqrt_embed(&density) {
            Ok(p) => p,
            Err(e) => return outcome(false, e.to_string()),
        };
        let norm = p.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_norm = worst_norm.max((norm - 1.0).abs());
        points.push(p);
    }
    // generic points off the nonnegative orthant
    for _ in 0..200 {
        let raw: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        points.push(SpherePoint::normalize(raw).unwrap());
    }
    let d = |a: &SpherePoint, b: &SpherePoint| sphere_distance(a, b).unwrap();
    let (mut worst_sym, mut worst_tri, mut worst_round) = (0.0f64, 0.0f64, 0.0f64);
    let n = points.len();
    for t in 0..3000 {
        let (i, j, k) = (t % n, rng.random_range(0..n), rng.random_range(0..n));
        let (a, b, c) = (&points[i], &points[j], &points[k]);
        worst_sym = worst_sym.max((d(a, b) - d(b, a)).abs());
        worst_tri = worst_tri.max(d(a, c) - d(a, b) - d(b, c));
        if d(a, b) < PI - 1e-3 {
            let back = sphere_log(a, b).and_then(|v| sphere_exp(a, &v));
            let err = match back {
                Ok(q) => q
                    .coords()
                    .iter()
                    .zip(b.coords())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            };
            worst_round = worst_round.max(err);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_sym <= 1e-9
            && worst_tri <= 1e-9
            && worst_round <= 1e-6
            && worst_norm <= 1e-9
            && worst_integral <= 1e-6
            && elapsed < Duration::from_secs(60),
        format!(
            "symmetry {worst_sym:.1e}, triangle excess {worst_tri:.1e}, exp∘log {worst_round:.1e}, \
             norm {worst_norm:.1e}, integral {worst_integral:.1e}, {elapsed:.1?}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let grid = GridSpec::new(0.0, 100.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<SpherePoint> = (0..30)
        .map(|_| {
            let raw: Vec<f64> = (0..grid.len())
                .map(|_| rng.random_range(0.0..1.0))
                .collect();
            SpherePoint::normalize(raw).unwrap()
        })
        .collect();
    let model = match pga_fit(&points, 12) {
        Ok(m) => m,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut worst_ortho = 0.0f64;
    for (i, u) in model.basis.iter().enumerate() {
        worst_ortho = worst_ortho.max(dot(u, model.base.coords()).abs());
        for (j, v) in model.basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max((dot(u, v) - target).abs());
        }
    }
    let mut monotone = true;
    for p in &points {
        let errs: Vec<f64> = (0..=model.k())
            .map(|k| model.reconstruction_error(p, k).unwrap())
            .collect();
        monotone &= errs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    }

    let base = &points[0];
    let mut dir: Vec<f64> = (0..grid.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let along = dot(&dir, base.coords());
    for (d, b) in dir.iter_mut().zip(base.coords()) {
        *d -= along * b;
    }
    let arc: Vec<SpherePoint> = (0..20)
        .map(|i| {
            let t = -0.4 + 0.04 * i as f64;
            let v: Vec<f64> = dir.iter().map(|d| d * t / norm(&dir)).collect();
            sphere_exp(base, &v).unwrap()
        })
        .collect();
    let first = match pga_fit(&arc, 3) {
        Ok(m) => m.explained_variance_ratio()[0],
        Err(e) => return outcome(false, e.to_string()),
    };
    outcome(
        worst_ortho <= 1e-8 && monotone && first >= 0.999,
        format!("orthonormality/tangency {worst_ortho:.1e}, monotone {monotone}, geodesic component 1 {first:.6}"),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn train_accuracy(x: &[Vec<f64>], y: &[Label], c: f64, scale: f64) -> f64 {
    let model = svm_train(x, y, c, scale).unwrap();
    x.iter()
        .zip(y)
        .filter(|(xi, yi)| model.predict(xi) == **yi)
        .count() as f64
        / x.len() as f64
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 0..60 {
        let (centre, label) = if i % 2 == 0 {
            (2.0, Label::Positive)
        } else {
            (-2.0, Label::Negative)
        };
        x.push(vec![
            centre + rng.random_range(-1.0..1.0),
            centre + rng.random_range(-1.0..1.0),
        ]);
        y.push(label);
    }
    let blobs = train_accuracy(&x, &y, 1.0, 1.0);

    let xor_x = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let xor_y = vec![
        Label::Positive,
        Label::Positive,
        Label::Negative,
        Label::Negative,
    ];
    let xor = train_accuracy(&xor_x, &xor_y, 100.0, 0.5);

    let kernel: Vec<f64> = squared_distances(&x)
        .into_iter()
        .map(|d| rbf(d, 1.0))
        .collect();
    let kkt = solve_dual(&kernel, &y, 1.0, 1e-3).map(|s| kkt_violation(&kernel, &y, &s.alpha, 1.0));

    let config = SearchConfig::default();
    let search = |s| {
        format!(
            "{:?}",
            hyperparam_search(&x, &y, &config, s).map(|r| r.best)
        )
    };
    let deterministic = search(7) == search(7);

    let kkt_ok = matches!(kkt, Ok(v) if v <= 1e-3);
    outcome(
        blobs == 1.0 && xor == 1.0 && kkt_ok && deterministic,
        format!(
            "blobs {blobs}, XOR {xor}, KKT residual {kkt:?}, search deterministic {deterministic}"
        ),
    )
}

fn desk_config() -> PipelineConfig {
    PipelineConfig {
        pga_k: 64,
        pca_dim: 128,
        seed: 11,
        ..PipelineConfig::default()
    }
}

struct DeskRun {
    report: String,
    ablation: String,
    accuracy: f64,
    h1: f64,
    h2: f64,
    elapsed: Duration,
}

fn desk_run(
    root: &Path,
    config: &PipelineConfig,
) -> ctph_core::Result<(DeskRun, ctph_core::pipeline::FeatureRun)> {
    let start = Instant::now();
    write_dataset(
        &generate_dataset(100, 100, 2024),
        root,
        &config.positive_dir,
        &config.negative_dir,
    )?;
    let index = ingest(root, &config.positive_dir, &config.negative_dir)?;
    let run = run_features(&index, config, &root.join("cache"))?;
    let report = evaluate(&run.features, config)?;
    let ablation = ablate(&run.features, config)?;
    Ok((
        DeskRun {
            report: report.to_text(),
            ablation: ablation.to_text(),
            accuracy: report.accuracy(),
            h1: ablation.accuracy("h1").unwrap_or(f64::NAN),
            h2: ablation.accuracy("h2").unwrap_or(f64::NAN),
            elapsed: start.elapsed(),
        },
        run,
    ))
}

fn criteria_7_8_10() -> Vec<(usize, Outcome)> {
    let config = desk_config();
    let first_dir = tempfile::tempdir().unwrap();
    let (first, run) = match desk_run(first_dir.path(), &config) {
        Ok(r) => r,
        Err(e) => {
            return [7, 8, 10]
                .map(|i| (i, outcome(false, e.to_string())))
                .into()
        }
    };
    let c7 = outcome(
        first.accuracy >= 90.0 && first.elapsed < Duration::from_secs(600) && first.h1 > first.h2,
        format!(
            "accuracy {:.2}%, H1-only {:.2}%, H2-only {:.2}%, {:.1?}",
            first.accuracy, first.h1, first.h2, first.elapsed
        ),
    );
    println!("{}", first.ablation.trim_end());

    let c8 = match train(&run.features, &config) {
        Ok((_, classifier)) => {
            let predictor = Predictor {
                config: config.clone(),
                pga: run.models.clone(),
                classifier,
            };
            let (mut total, mut signal_flips, mut background_flips) = (0, 0, 0);
            for i in 0..30 {
                let img = generate(Label::Positive, 900_000 + i);
                let masked = |rect| -> ctph_core::Result<bool> {
                    let before = predictor.predict(&img.image)?.0;
                    let after = predictor
                        .predict(&mask_region(&img.image, rect, img.background_level)?)?
                        .0;
                    Ok(before != after)
                };
                match (masked(img.signal_region), masked(img.background_region)) {
                    (Ok(s), Ok(b)) => {
                        total += 1;
                        signal_flips += s as usize;
                        background_flips += b as usize;
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        return [(7, c7), (8, outcome(false, e.to_string()))].into()
                    }
                }
            }
            let (s, b) = (
                signal_flips as f64 / total as f64,
                background_flips as f64 / total as f64,
            );
            outcome(
                total >= 20 && s >= 0.8 && b <= 0.2,
                format!(
                    "{total} positives: annulus mask flips {:.0}%, background mask flips {:.0}%",
                    100.0 * s,
                    100.0 * b
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    };

    let second_dir = tempfile::tempdir().unwrap();
    let c10 = match desk_run(second_dir.path(), &config) {
        Ok((second, _)) => outcome(
            second.report == first.report && second.ablation == first.ablation,
            format!(
                "two cold runs, reports identical: {}",
                second.report == first.report
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    };
    vec![(7, c7), (8, c8), (10, c10)]
}

fn fidelity_run(root: &Path, config: &PipelineConfig) -> ctph_core::Result<String> {
    let index = ingest(root, &config.positive_dir, &config.negative_dir)?;
    let run = run_features(&index, config, &root.join("cache"))?;
    Ok(evaluate(&run.features, config)?.to_text())
}

fn reports_all_metrics(report: &str) -> bool {
    ["accuracy", "precision", "recall", "specificity", "f1"]
        .iter()
        .all(|m| {
            report.contains(&format!("mean.{m} = ")) && report.contains(&format!("std.{m} = "))
        })
}

fn criterion_9() -> Outcome {
    let config = PipelineConfig::default().paper_fidelity();
    let dir = tempfile::tempdir().unwrap();
    let smoke = write_dataset(
        &generate_dataset(10, 10, 9),
        dir.path(),
        &config.positive_dir,
        &config.negative_dir,
    )
    .and_then(|_| fidelity_run(dir.path(), &config));
    let smoke_ok = matches!(&smoke, Ok(r) if reports_all_metrics(r));
    let external = match std::env::var_os("CTPH_DATASET") {
        None => "no external dataset (set CTPH_DATASET to run one)".to_string(),
        Some(root) => match fidelity_run(Path::new(&root), &config) {
            Ok(r) if reports_all_metrics(&r) => {
                println!("{}", r.trim_end());
                "external dataset completed".to_string()
            }
            Ok(_) => return outcome(false, "external report is missing metrics"),
            Err(e) => return outcome(false, format!("external dataset: {e}")),
        },
    };
    let detail = match &smoke {
        Ok(_) => {
            format!("fidelity-mode smoke run reports five metrics with std: {smoke_ok}; {external}")
        }
        Err(e) => format!("fidelity-mode smoke run failed: {e}"),
    };
    outcome(smoke_ok, detail)
}

fn main() {
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
    ];
    results.extend(criteria_7_8_10());
    results.push((9, criterion_9()));
    results.sort_by_key(|(i, _)| *i);

    let mut failed = 0;
    for (i, o) in &results {
        failed += !o.pass as usize;
        println!(
            "criterion {i:>2}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
