use num_complex::Complex64;

use sdmd::backsub::{evaluate, separate_newest, SeparationOptions};
use sdmd::dmd::StreamingDmd;
use sdmd::io::matrix_file::{MatrixReader, MatrixWriter};
use sdmd::io::pgm::{write_pgm, FrameSource};
use sdmd::io::synthetic::{parse_spectrum, MovingBlob, PlantedSystem};
use sdmd::unitary::{sparsify, transform, verify_invariance, Coeffs, Dct, InvarianceTolerances};
use sdmd::Precision;

#[test]
fn matrix_file_stream_feeds_engine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.sdmd");
    let sys = PlantedSystem::new(&parse_spectrum("0.95,0.8:0.6").unwrap(), 40, 3).unwrap();
    let mut w = MatrixWriter::create(&path, Precision::Double, 40, 20).unwrap();
    for k in 0..20 {
        w.write_column(&sys.snapshot(k)).unwrap();
    }
    w.finish().unwrap();

    let mut r = MatrixReader::open(&path).unwrap();
    let mut engine = StreamingDmd::<f64>::with_default_tol(40, 8).unwrap();
    let mut last = None;
    while let Some(col) = r.next_column::<f64>() {
        let col = col.unwrap();
        last = Some(if engine.is_warm() {
            engine.dmd_step(&col).unwrap()
        } else {
            engine.push(&col).unwrap();
            continue;
        });
    }
    let d = last.unwrap();
    assert_eq!(d.time_base, 12);
    let mut want = sys.eigenvalues();
    let mut got = d.lambda.clone();
    let key = |z: &Complex64| (z.norm(), z.im);
    want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).norm() < 1e-9, "{got:?} vs {want:?}");
    }
}

#[test]
fn single_precision_stream_tracks_double() {
    let sys = PlantedSystem::new(&parse_spectrum("1.0,0.9:0.2").unwrap(), 200, 8).unwrap();
    let mut a = StreamingDmd::<f64>::with_default_tol(200, 10).unwrap();
    let mut b = StreamingDmd::<f32>::with_default_tol(200, 10).unwrap();
    for k in 0..30 {
        let x = sys.snapshot(k);
        let xs: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        a.push(&x).unwrap();
        b.push(&xs).unwrap();
    }
    let (da, db) = (a.dmd().unwrap(), b.dmd().unwrap());
    assert_eq!(da.rank(), db.rank());
    for (x, y) in da.svd.sigma.iter().zip(&db.svd.sigma) {
        assert!((x - y).abs() / x < 1e-5);
    }
}

#[test]
fn pgm_frames_through_dct_backsub() {
    let dir = tempfile::tempdir().unwrap();
    let (wd, ht, w) = (32, 24, 20);
    let blob = MovingBlob::new(wd, ht, 4).unwrap();
    for k in 0..w + 15 {
        write_pgm(&dir.path().join(format!("f{k:03}.pgm")), wd, ht, &blob.frame(k).0).unwrap();
    }
    let dct = Dct::new_2d(wd, ht).unwrap();
    let opts = SeparationOptions::default();
    let mut engine = StreamingDmd::<f64>::with_default_tol(wd * ht, w).unwrap();
    let mut f_sum = 0.0;
    let mut scored = 0;
    for (k, frame) in FrameSource::open(dir.path()).unwrap().enumerate() {
        let frame = frame.unwrap();
        let tc = transform(&dct, &frame.pixels).unwrap();
        let Coeffs::Dense(v) = tc.coeffs else { unreachable!() };
        if !engine.is_warm() {
            engine.push(&v).unwrap();
            continue;
        }
        let d = engine.dmd_step(&v).unwrap();
        let r = separate_newest(&frame.pixels, &d, w, Some(&dct), &opts).unwrap();
        assert_eq!(r.frame_index, k as u64);
        f_sum += evaluate(&r.mask[0], &blob.frame(k).1).unwrap().f_measure;
        scored += 1;
    }
    assert_eq!(scored, 15);
    assert!(f_sum / scored as f64 > 0.85);
}

#[test]
fn sparse_ingestion_of_transform_sparse_data() {
    // snapshots whose cosine coefficients live on the first 16 of 128 indices
    let sys = PlantedSystem::new(&parse_spectrum("1.0,0.97:0.3").unwrap(), 16, 6).unwrap();
    let dct = Dct::new_1d(128).unwrap();
    let raw: Vec<Vec<f64>> = (0..30)
        .map(|k| {
            let mut c = sys.snapshot(k);
            c.resize(128, 0.0);
            dct.inverse(&c).unwrap()
        })
        .collect();
    let tc = sparsify(&transform(&dct, &raw[0]).unwrap(), 0.25).unwrap();
    assert!(tc.energy_ratio > 1.0 - 1e-12);
    for keep in [1.0, 0.25] {
        verify_invariance(&raw, &dct, 10, 1e-6, keep)
            .unwrap()
            .check(&InvarianceTolerances::default())
            .unwrap();
    }
}
