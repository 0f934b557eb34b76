mod support;

use hpe_core::constraint::project;
use hpe_core::forcing::ForcingSpec;
use hpe_core::integrator::{Integrator, IntegratorOptions, State};
use hpe_core::io::checkpoint::{decode_header, encode};
use hpe_core::io::{load_checkpoint, load_checkpoint_on, save_checkpoint};
use hpe_core::{make_grid, HpeError, SpectralField};

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.chk");
    let g = make_grid(8, 6, 5, 0.9, None).unwrap();
    let s = State::new(SpectralField::random(&g, 21, 0.0).scaled(1e5), 0.1 + 0.2);
    save_checkpoint(&s, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.t.to_bits(), s.t.to_bits());
    assert!(back.v.grid().same_space(&g));
    assert!(support::bit_equal(&back.v, &s.v));
    let hdr = decode_header(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!((hdr.m, hdr.n, hdr.k), (8, 6, 5));
    assert_eq!(hdr.h, 0.9);
}

#[test]
fn resumed_run_matches_uninterrupted_run_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.chk");
    let g = make_grid(8, 8, 6, 1.0, None).unwrap();
    let fs = ForcingSpec::preset("channel", 1.0, 10.0).unwrap();
    let integ = Integrator::new(&g, &fs, 2e-3, IntegratorOptions::default()).unwrap();
    let v0 = project(&SpectralField::random(&g, 4, 1.0));

    let mut straight = State::new(v0.clone(), 0.0);
    integ.run(&mut straight, 300, 1, None, None).unwrap();

    let mut first = State::new(v0, 0.0);
    integ.run(&mut first, 150, 1, None, None).unwrap();
    save_checkpoint(&first, &path).unwrap();
    let mut resumed = load_checkpoint_on(&path, &g).unwrap();
    integ.run(&mut resumed, 150, 1, None, None).unwrap();

    assert_eq!(resumed.t.to_bits(), straight.t.to_bits());
    assert!(support::bit_equal(&resumed.v, &straight.v));
}

#[test]
fn damaged_files_are_rejected() {
    let g = make_grid(4, 4, 2, 1.0, None).unwrap();
    let bytes = encode(&State::new(SpectralField::random(&g, 1, 0.0), 0.0));
    let dir = tempfile::tempdir().unwrap();

    let short = dir.path().join("short.chk");
    std::fs::write(&short, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_checkpoint(&short).is_err());

    let mut bad = bytes.clone();
    bad[0] = b'X';
    let magic = dir.path().join("magic.chk");
    std::fs::write(&magic, &bad).unwrap();
    assert!(load_checkpoint(&magic).is_err());

    let ok = dir.path().join("ok.chk");
    std::fs::write(&ok, &bytes).unwrap();
    let other = make_grid(6, 4, 2, 1.0, None).unwrap();
    assert!(matches!(load_checkpoint_on(&ok, &other), Err(HpeError::Checkpoint(_))));
}
