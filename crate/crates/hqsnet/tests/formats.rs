use hqsnet::io::*;
use hqsnet::HarnessError;
use hqsnet_core::net::{init_net, NetConfig, Residual};
use hqsnet_core::sampling::generate_mask;
use hqsnet_core::{ComplexGrid, RealGrid};
use num_complex::Complex64;

fn real_grid() -> RealGrid {
    RealGrid::from_fn(5, 7, |i, j| (i * 7 + j) as f64 * 0.125 - 1.0)
}

#[test]
fn real_grid_roundtrip_is_exact_in_f32() {
    let g = real_grid();
    let back = decode_grid(&encode_real_grid(&g)).unwrap().into_real().unwrap();
    assert_eq!(back, g);
}

#[test]
fn complex_grid_roundtrip() {
    let g = ComplexGrid::from_fn(4, 6, |i, j| Complex64::new(i as f64 * 0.5, -(j as f64) * 0.25));
    let back = decode_grid(&encode_complex_grid(&g)).unwrap();
    assert_eq!(back.shape(), (4, 6));
    assert!(back.clone().into_real().is_err());
    assert_eq!(back.into_complex(), g);
}

#[test]
fn grid_rejects_bad_magic_truncation_and_trailing_bytes() {
    let bytes = encode_real_grid(&real_grid());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_grid(&bad), Err(HarnessError::Format(_))));
    assert!(matches!(decode_grid(&bytes[..bytes.len() - 1]), Err(HarnessError::Format(_))));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode_grid(&long), Err(HarnessError::Format(_))));
    let mut dtype = bytes;
    dtype[12] = 7;
    assert!(matches!(decode_grid(&dtype), Err(HarnessError::Format(_))));
}

#[test]
fn mask_roundtrip_and_header_only_read() {
    let m = generate_mask(16, 24, 4.0, 2, 9).unwrap();
    let bytes = encode_mask(&m);
    assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 1 + 8 + (16 * 24usize).div_ceil(8));
    assert_eq!(decode_mask(&bytes).unwrap(), m);
    let hd = decode_mask_header(&bytes[..25]).unwrap();
    assert_eq!((hd.height, hd.width, hd.accel, hd.order, hd.seed), (16, 24, 4.0, 2, 9));
    assert!(decode_mask(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn mask_bits_are_lsb_first() {
    let m = generate_mask(16, 16, 4.0, 2, 1).unwrap();
    let bytes = encode_mask(&m);
    for (p, &bit) in m.bits().iter().enumerate() {
        assert_eq!(bytes[25 + p / 8] >> (p % 8) & 1 == 1, bit);
    }
}

#[test]
fn checkpoint_roundtrip() {
    let cfg = NetConfig { blocks: 2, channels: 4, residual: Residual::Global, shared_weights: true, ..NetConfig::default() };
    let params = init_net(&cfg, 3).unwrap();
    let (back, bcfg) = decode_checkpoint(&encode_checkpoint(&params, &cfg).unwrap()).unwrap();
    assert_eq!(bcfg, cfg);
    for (a, b) in back.tensors().into_iter().zip(params.tensors()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
}

#[test]
fn checkpoint_rejects_mismatched_payload_and_version() {
    let cfg = NetConfig { blocks: 2, channels: 4, ..NetConfig::default() };
    let bytes = encode_checkpoint(&init_net(&cfg, 3).unwrap(), &cfg).unwrap();
    // Header claims three blocks but the payload holds two.
    let mut k = bytes.clone();
    k[6] = 3;
    assert!(matches!(decode_checkpoint(&k), Err(HarnessError::Format(_))));
    let mut v = bytes.clone();
    v[4] = 9;
    assert!(matches!(decode_checkpoint(&v), Err(HarnessError::Format(_))));
    assert!(decode_checkpoint(&bytes[..bytes.len() - 4]).is_err());
}

#[test]
fn checkpoint_rejects_mismatched_params() {
    let small = NetConfig { blocks: 2, channels: 4, ..NetConfig::default() };
    let params = init_net(&small, 1).unwrap();
    assert!(encode_checkpoint(&params, &NetConfig::default()).is_err());
}

#[test]
fn files_and_missing_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let g = real_grid();
    let p = dir.path().join("g.grd");
    write_real_grid(&p, &g).unwrap();
    assert_eq!(&sniff_magic(&p).unwrap(), GRID_MAGIC);
    assert_eq!(read_grid(&p).unwrap().into_real().unwrap(), g);
    let m = generate_mask(16, 16, 4.0, 2, 5).unwrap();
    let mp = dir.path().join("m.msk");
    write_mask(&mp, &m).unwrap();
    assert_eq!(read_mask_header(&mp).unwrap().seed, 5);
    assert_eq!(read_mask(&mp).unwrap(), m);
    let missing = dir.path().join("none.hqn");
    assert!(matches!(load_checkpoint(&missing), Err(HarnessError::MissingCheckpoint(p)) if p == missing));
    assert!(matches!(read_grid(&missing), Err(HarnessError::Io { .. })));
}
