//! File-format round trips, a third-party NIfTI fixture and a union-find
//! oracle for connected components.

mod common;

use std::path::PathBuf;

use common::{random_blobs, random_mask};
use promptsim::morph::SimRng;
use promptsim::volume::nifti::{decode_nifti, encode_nifti};
use promptsim::volume::{
    connected_components, read_mask, read_native, read_nifti, read_volume, write_native, write_nifti, write_volume,
    BinaryMask, Connectivity, DType, Geometry, VoxelData, VoxelGrid,
};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nifti").join(name)
}

fn geometry() -> impl Strategy<Value = Geometry> {
    (
        prop::array::uniform3(1usize..9),
        prop::array::uniform3(0.1f64..4.0),
    )
        .prop_map(|(dims, spacing)| {
            // spacing goes through f32 in NIfTI headers
            Geometry::new(dims, spacing.map(|s| s as f32 as f64)).unwrap()
        })
}

fn grid(dtype: DType) -> impl Strategy<Value = VoxelGrid> {
    geometry().prop_flat_map(move |g| {
        let n = g.len();
        let data = match dtype {
            DType::Uint8 => prop::collection::vec(any::<u8>(), n).prop_map(VoxelData::U8).boxed(),
            DType::Int16 => prop::collection::vec(any::<i16>(), n).prop_map(VoxelData::I16).boxed(),
            DType::Float32 => prop::collection::vec(-1e6f32..1e6, n).prop_map(VoxelData::F32).boxed(),
        };
        data.prop_map(move |d| VoxelGrid::new(g, d).unwrap())
    })
}

fn any_grid() -> impl Strategy<Value = VoxelGrid> {
    prop_oneof![grid(DType::Uint8), grid(DType::Int16), grid(DType::Float32)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nifti_bytes_round_trip(g in any_grid()) {
        let bytes = encode_nifti(&g);
        prop_assert_eq!(bytes.len(), 352 + g.data().to_le_bytes().len());
        let back = decode_nifti(&bytes).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn native_file_round_trip(g in any_grid()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vgh");
        write_native(&g, &path).unwrap();
        prop_assert_eq!(read_native(&path).unwrap(), g.clone());
        // either file of the pair names the volume
        prop_assert_eq!(read_volume(dir.path().join("v.vgd")).unwrap(), g);
    }

    #[test]
    fn truncated_nifti_is_rejected(g in any_grid(), cut in 1usize..64) {
        let bytes = encode_nifti(&g);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_nifti(&bytes[..keep]).is_err());
    }
}

#[test]
fn nifti_file_round_trip_per_dtype() {
    let dir = tempfile::tempdir().unwrap();
    let g = Geometry::new([3, 4, 5], [0.7, 1.1, 3.0]).unwrap();
    let n = g.len();
    for data in [
        VoxelData::U8((0..n).map(|i| (i * 7 % 256) as u8).collect()),
        VoxelData::I16((0..n).map(|i| (i as i16 - 30) * 1000).collect()),
        VoxelData::F32((0..n).map(|i| i as f32 * 0.125 - 3.0).collect()),
    ] {
        let grid = VoxelGrid::new(g, data).unwrap();
        let path = dir.path().join(format!("{}.nii", grid.dtype().name()));
        write_nifti(&grid, &path).unwrap();
        let back = read_nifti(&path).unwrap();
        assert_eq!(back.spacing(), [0.7f32 as f64, 1.1f32 as f64, 3.0]);
        assert_eq!(back.data(), grid.data());
    }
}

#[test]
fn reads_nibabel_int16_ramp() {
    let g = read_volume(fixture("ramp_int16.nii")).unwrap();
    assert_eq!(g.dims(), [5, 4, 3]);
    assert_eq!(g.dtype(), DType::Int16);
    assert_eq!(g.spacing(), [0.8f32 as f64, 1.25, 2.5]);
    for k in 0..3 {
        for j in 0..4 {
            for i in 0..5 {
                assert_eq!(g.at([i, j, k]), (i + 10 * j + 100 * k) as f64 - 50.0);
            }
        }
    }
}

#[test]
fn reads_nibabel_uint8_labels_and_float_plane() {
    let m = read_mask(fixture("checker_uint8.nii")).unwrap();
    assert_eq!(m.spacing(), [1.0, 1.0, 2.0]);
    assert_eq!(m, BinaryMask::from_fn(*m.geometry(), |[i, j, k]| (i + j + k) % 2 == 0));

    let f = read_volume(fixture("plane_float32.nii")).unwrap();
    assert_eq!(f.dtype(), DType::Float32);
    assert_eq!(f.spacing(), [2.0, 1.5, 1.0]);
    for (idx, v) in f.to_f64_vec().into_iter().enumerate() {
        let [i, j, k] = f.geometry().coords(idx);
        assert_eq!(v, 0.5 * i as f64 - 0.25 * j as f64 + k as f64);
    }
}

#[test]
fn our_encoding_of_the_fixture_decodes_identically() {
    let g = read_nifti(fixture("ramp_int16.nii")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.nii");
    write_volume(&g, &out).unwrap();
    assert_eq!(read_volume(&out).unwrap(), g);
}

/// Plain union-find labelling used as an independent reference.
fn union_find_partition(mask: &BinaryMask, conn: Connectivity) -> Vec<usize> {
    let g = *mask.geometry();
    let mut parent: Vec<usize> = (0..g.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let reach: i64 = 1;
    for idx in mask.iter_indices() {
        let [i, j, k] = g.coords(idx);
        for dk in -reach..=reach {
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let manhattan = di.abs() + dj.abs() + dk.abs();
                    if manhattan == 0 || (conn == Connectivity::Six && manhattan != 1) {
                        continue;
                    }
                    if let Some(n) = g.checked([i as i64 + di, j as i64 + dj, k as i64 + dk]) {
                        let nidx = g.index(n);
                        if mask.get_index(nidx) {
                            let (a, b) = (find(&mut parent, idx), find(&mut parent, nidx));
                            parent[a] = b;
                        }
                    }
                }
            }
        }
    }
    (0..g.len()).map(|x| find(&mut parent, x)).collect()
}

#[test]
fn components_match_union_find() {
    for seed in 0..40 {
        let mut rng = SimRng::new(900 + seed);
        let g = Geometry::isotropic([10, 9, 8], 1.0).unwrap();
        let mask = if seed % 2 == 0 { random_mask(g, 0.3, &mut rng) } else { random_blobs(g, 4, &mut rng) };
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let c = connected_components(&mask, conn);
            let roots = union_find_partition(&mask, conn);
            let fg: Vec<usize> = mask.iter_indices().collect();
            let distinct: std::collections::HashSet<usize> = fg.iter().map(|&i| roots[i]).collect();
            assert_eq!(c.count(), distinct.len(), "seed {seed} {conn:?}");
            for idx in 0..g.len() {
                assert_eq!(c.labels[idx] == 0, !mask.get_index(idx));
            }
            // same partition: every root maps to one label and no label is shared
            let mut label_of_root = std::collections::HashMap::new();
            for &i in &fg {
                let l = *label_of_root.entry(roots[i]).or_insert(c.labels[i]);
                assert_eq!(l, c.labels[i], "seed {seed} {conn:?}");
            }
            let labels: std::collections::HashSet<u32> = label_of_root.values().copied().collect();
            assert_eq!(labels.len(), distinct.len());
            let total: usize = (1..=c.count() as u32).map(|l| c.size(l)).sum();
            assert_eq!(total, mask.count());
        }
    }
}
