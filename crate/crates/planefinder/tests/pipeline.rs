use planefinder::bundle::ModelBundle;
use planefinder::config::PipelineConfig;
use planefinder::manifest::DatasetManifest;
use planefinder::pipeline::{self, Method};
use planefinder::synth::{self, SynthOptions};
use planefinder::volume_io::load_volume;
use planefinder_core::volume::generate_candidates;

/// One training and one test volume, trained once and shared by every check below.
#[test]
fn small_phantom_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let opts = SynthOptions { volumes: 2, train_volumes: 1, seed: 3, ..SynthOptions::default() };
    let out = synth::write_dataset(&data, &opts).unwrap();
    let cfg = PipelineConfig::load(&out.config).unwrap();
    let train = DatasetManifest::load(&out.train_manifest).unwrap();
    let test = DatasetManifest::load(&out.test_manifest).unwrap();
    let bundle = pipeline::train_pipeline(&train, &cfg).unwrap();

    // bundle round trip and tamper detection
    let bdir = dir.path().join("bundle");
    let hash = bundle.save(&bdir).unwrap();
    assert_eq!(hash, bundle.content_hash());
    assert_eq!(ModelBundle::read_hash(&bdir).unwrap(), hash);
    let loaded = ModelBundle::load(&bdir).unwrap();
    assert_eq!(loaded, bundle);
    let coefs = bdir.join("svm_0_coefs.pfmat");
    let mut bytes = std::fs::read(&coefs).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&coefs, &bytes).unwrap();
    assert!(ModelBundle::load(&bdir).is_err());

    // locate returns every candidate in descending order when top_k covers them all
    let vol = load_volume(&out.volumes[1]).unwrap();
    let n = generate_candidates(vol.dims(), &cfg.candidates).unwrap().len();
    let all = pipeline::locate_standard_planes(&vol, &bundle, 0, n + 10, "vol01").unwrap();
    assert_eq!(all.len(), n);
    assert!(all.windows(2).all(|w| w[0].decision > w[1].decision
        || (w[0].decision == w[1].decision && w[0].candidate < w[1].candidate)));
    let top = pipeline::locate_standard_planes(&vol, &bundle, 0, 3, "vol01").unwrap();
    assert_eq!(top, all[..3].to_vec());
    assert!(pipeline::locate_standard_planes(&vol, &bundle, 0, 0, "vol01").is_err());
    assert!(pipeline::locate_standard_planes(&vol, &bundle, bundle.classes, 3, "vol01").is_err());

    // feature order does not change any candidate's decision values
    let candidates = generate_candidates(vol.dims(), &cfg.candidates).unwrap();
    let forward: Vec<usize> = (0..n).collect();
    let backward: Vec<usize> = (0..n).rev().collect();
    let fa = pipeline::volume_features(&vol, &candidates, &forward, &cfg, "vol01").unwrap();
    let fb = pipeline::volume_features(&vol, &candidates, &backward, &cfg, "vol01").unwrap();
    for (i, f) in fa.iter().enumerate() {
        let a = bundle.classify_plane(f).unwrap();
        let b = bundle.classify_plane(&fb[n - 1 - i]).unwrap();
        assert_eq!(a, b);
    }
    for l in &all {
        assert_eq!(l.params, candidates[l.candidate]);
    }

    // report shapes and ranges
    let synthetic = pipeline::evaluate_synthetic(&bundle, &test).unwrap();
    assert_eq!(synthetic.accuracy.len(), test.classes * 2);
    assert!(synthetic.accuracy.iter().filter_map(|c| c.accuracy).all(|a| (0.0..=1.0).contains(&a)));
    let volumes = pipeline::evaluate_volumes(&bundle, &test).unwrap();
    assert_eq!(volumes.f1.len(), test.classes);
    assert!(volumes.f1.iter().all(|r| (0.0..=1.0).contains(&r.mean_f1)));

    let (rows, extraction) = pipeline::benchmark(&bundle, &test).unwrap();
    assert_eq!(rows.iter().map(|r| r.method).collect::<Vec<_>>(), Method::TIMED.to_vec());
    assert!(rows.iter().all(|r| r.train_secs > 0.0 && r.test_secs > 0.0));
    assert!(extraction > 0.0);
    let concat = rows.iter().find(|r| r.method == Method::Concat).unwrap();
    assert_eq!(concat.dims, cfg.codebook.k_static + cfg.codebook.k_spacetime);
    assert_eq!(rows.iter().find(|r| r.method == Method::Embedded).unwrap().dims, cfg.embedding.c);
}
