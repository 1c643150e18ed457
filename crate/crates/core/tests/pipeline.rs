use std::path::Path;

use ctph_core::classifier::Label;
use ctph_core::pipeline::{evaluate, ingest, run_features, train, PipelineConfig, Predictor};
use ctph_core::synthetic::{generate, generate_dataset, write_dataset};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        pga_k: 4,
        pca_dim: 8,
        folds: 3,
        search_grid_points: 3,
        seed: 3,
        ..PipelineConfig::default()
    }
}

fn dataset(root: &Path, per_class: usize, config: &PipelineConfig) {
    write_dataset(
        &generate_dataset(per_class, per_class, 41),
        root,
        &config.positive_dir,
        &config.negative_dir,
    )
    .unwrap();
}

#[test]
fn warm_cache_reproduces_cold_run() {
    let config = small_config();
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 5, &config);
    let index = ingest(data.path(), &config.positive_dir, &config.negative_dir).unwrap();

    let cache = tempfile::tempdir().unwrap();
    let cold = run_features(&index, &config, cache.path()).unwrap();
    assert_eq!((cold.diagram_hits, cold.diagram_misses), (0, 10));
    assert!(!cold.riemannian_cached);

    let warm = run_features(&index, &config, cache.path()).unwrap();
    assert_eq!((warm.diagram_hits, warm.diagram_misses), (10, 0));
    assert!(warm.riemannian_cached);
    assert_eq!(warm.features.to_text(), cold.features.to_text());

    let other = tempfile::tempdir().unwrap();
    let fresh = run_features(&index, &config, other.path()).unwrap();
    assert_eq!(fresh.features.to_text(), cold.features.to_text());
    assert_eq!(
        evaluate(&warm.features, &config).unwrap().to_text(),
        evaluate(&fresh.features, &config).unwrap().to_text()
    );
}

#[test]
fn stage_keys_invalidate_only_their_stage() {
    let config = small_config();
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 4, &config);
    let index = ingest(data.path(), &config.positive_dir, &config.negative_dir).unwrap();
    let cache = tempfile::tempdir().unwrap();
    run_features(&index, &config, cache.path()).unwrap();

    let coarser = PipelineConfig {
        grid_step: 10.0,
        ..config.clone()
    };
    let run = run_features(&index, &coarser, cache.path()).unwrap();
    assert_eq!((run.diagram_hits, run.diagram_misses), (8, 0));
    assert!(!run.riemannian_cached);
    assert_eq!(run.features.rows[0].values.len(), 4 * 4);

    let lower_threshold = PipelineConfig {
        vr_threshold: 100.0,
        ..config.clone()
    };
    let run = run_features(&index, &lower_threshold, cache.path()).unwrap();
    assert_eq!((run.diagram_hits, run.diagram_misses), (0, 8));
    assert!(!run.riemannian_cached);
}

#[test]
fn undecodable_image_is_skipped() {
    let config = small_config();
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 5, &config);
    std::fs::write(
        data.path().join(&config.positive_dir).join("pos_0002.pgm"),
        b"P5 not an image",
    )
    .unwrap();
    let index = ingest(data.path(), &config.positive_dir, &config.negative_dir).unwrap();
    assert_eq!(index.entries.len(), 10);

    let cache = tempfile::tempdir().unwrap();
    let run = run_features(&index, &config, cache.path()).unwrap();
    assert_eq!(run.features.rows.len(), 9);
    assert_eq!(run.features.skipped.len(), 1);
    assert!(run.features.skipped[0].0.ends_with("pos_0002.pgm"));
    assert!(evaluate(&run.features, &config).is_ok());
}

#[test]
fn saved_predictor_gives_identical_decisions() {
    let config = small_config();
    let data = tempfile::tempdir().unwrap();
    dataset(data.path(), 6, &config);
    let index = ingest(data.path(), &config.positive_dir, &config.negative_dir).unwrap();
    let run = run_features(&index, &config, &data.path().join("cache")).unwrap();
    let (_, classifier) = train(&run.features, &config).unwrap();
    let predictor = Predictor {
        config: config.clone(),
        pga: run.models,
        classifier,
    };
    let model_dir = data.path().join("model");
    predictor.save(&model_dir).unwrap();
    let loaded = Predictor::load(&model_dir).unwrap();
    for seed in [100, 101, 102] {
        for label in [Label::Positive, Label::Negative] {
            let img = generate(label, seed).image;
            let (a, b) = (
                predictor.predict(&img).unwrap(),
                loaded.predict(&img).unwrap(),
            );
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }
}
