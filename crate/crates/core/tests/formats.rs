use std::path::Path;

use occond_core::io::{read_pfm, write_pfm, PfmImage};
use occond_core::Grid;
use proptest::prelude::*;

/// Header and rows assembled by hand, bottom row first.
fn hand_pfm(magic: &str, w: usize, h: usize, scale: &str, rows_bottom_up: &[f32], big_endian: bool) -> Vec<u8> {
    let mut b = format!("{magic}\n# written by hand\n{w} {h}\n{scale}\n").into_bytes();
    for v in rows_bottom_up {
        b.extend_from_slice(&if big_endian { v.to_be_bytes() } else { v.to_le_bytes() });
    }
    b
}

#[test]
fn decodes_hand_written_files() {
    let bytes = hand_pfm("Pf", 2, 2, "-1.0", &[3.0, 4.0, 1.0, 2.0], false);
    let img = PfmImage::decode(&bytes, Path::new("le")).unwrap();
    assert_eq!(img.data, vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(img.comments, vec!["written by hand".to_string()]);

    let bytes = hand_pfm("Pf", 2, 1, "1.0", &[5.0, f32::INFINITY], true);
    assert_eq!(PfmImage::decode(&bytes, Path::new("be")).unwrap().data, vec![5.0, f32::INFINITY]);

    let bytes = hand_pfm("PF", 1, 2, "-1", &[0.0, 0.5, 1.0, -1.0, -0.5, 0.25], false);
    let img = PfmImage::decode(&bytes, Path::new("rgb")).unwrap();
    assert_eq!(img.channels, 3);
    assert_eq!(img.data, vec![-1.0, -0.5, 0.25, 0.0, 0.5, 1.0]);
}

#[test]
fn missing_file_reports_path() {
    let err = read_pfm(Path::new("/nonexistent/depth.pfm")).unwrap_err();
    assert_eq!(err.path(), Path::new("/nonexistent/depth.pfm"));
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact(w in 1usize..9, h in 1usize..9, seed in any::<u32>()) {
        let g = Grid::from_fn(w, h, |r, c| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add((r * 31 + c) as u32) & 0x7f7f_ffff));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pfm");
        write_pfm(&p, &PfmImage::from_grid(&g)).unwrap();
        let back = read_pfm(&p).unwrap();
        let got: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u32> = g.as_slice().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(got, want);
    }
}
