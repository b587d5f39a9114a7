use occond_core::occlusion::{
    canny_edges, depth_edges, dilate, disk_offsets, filter_small_components, masked_edges, occlusion_mask, refine_mask,
    EdgeMap, EdgeMethod, OcclusionMask, RefineParams,
};
use occond_core::{BinaryMap, Grid};
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = Grid<u32>> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(0u32..7, w * h).prop_map(move |d| Grid::from_vec(w, h, d))
    })
}

fn masks() -> impl Strategy<Value = BinaryMap> {
    (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::bool::weighted(0.3), w * h).prop_map(move |d| Grid::from_vec(w, h, d))
    })
}

/// Component sizes by flood fill over an explicit 8-neighbour list.
fn component_sizes(mask: &BinaryMap) -> Grid<usize> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let mut label = Grid::filled(mask.width(), mask.height(), usize::MAX);
    let mut sizes = Vec::new();
    for start in 0..mask.len() {
        if !mask.as_slice()[start] || label.as_slice()[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        label.as_mut_slice()[start] = id;
        let mut n = 0;
        while let Some(i) = stack.pop() {
            n += 1;
            let (r, c) = ((i as isize) / w, (i as isize) % w);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h || nc >= w {
                        continue;
                    }
                    let j = (nr * w + nc) as usize;
                    if mask.as_slice()[j] && label.as_slice()[j] == usize::MAX {
                        label.as_mut_slice()[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(n);
    }
    label.map(|&l| if l == usize::MAX { 0 } else { sizes[l] })
}

fn dilate_oracle(mask: &BinaryMap, radius: u32) -> BinaryMap {
    let r2 = (radius * radius) as isize;
    Grid::from_fn(mask.width(), mask.height(), |row, col| {
        (0..mask.height()).any(|r| {
            (0..mask.width()).any(|c| {
                let (dr, dc) = (r as isize - row as isize, c as isize - col as isize);
                *mask.get(r, c) && dr * dr + dc * dc <= r2
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mask_is_count_above_two(count in counts()) {
        let m = occlusion_mask(&count);
        for (&c, &b) in count.as_slice().iter().zip(m.mask.as_slice()) {
            prop_assert_eq!(b, c > 2);
        }
    }

    #[test]
    fn small_components_match_flood_fill(mask in masks(), area_min in 0usize..8) {
        let sizes = component_sizes(&mask);
        let kept = filter_small_components(&mask, area_min);
        for i in 0..mask.len() {
            prop_assert_eq!(kept.as_slice()[i], mask.as_slice()[i] && sizes.as_slice()[i] >= area_min);
        }
    }

    #[test]
    fn dilation_matches_distance_check(mask in masks(), radius in 0u32..4) {
        prop_assert_eq!(dilate(&mask, radius), dilate_oracle(&mask, radius));
    }

    #[test]
    fn refinement_is_monotone(mask in masks(), area_min in 0usize..6, radius in 0u32..3) {
        let params = RefineParams { area_min, dilation_radius: radius };
        let out = refine_mask(&mask, params);
        let bigger = refine_mask(&mask, RefineParams { dilation_radius: radius + 1, ..params });
        prop_assert!(out.mask.is_subset_of(&bigger.mask));
        prop_assert!(filter_small_components(&mask, area_min).is_subset_of(&out.mask));
        prop_assert_eq!(refine_mask(&mask, RefineParams::NONE).mask, mask);
    }

    #[test]
    fn masked_edges_are_in_both(edges in masks(), seed in any::<u64>()) {
        let mask = Grid::from_fn(edges.width(), edges.height(), |r, c| (seed >> ((r * 7 + c) % 64)) & 1 == 1);
        let e = EdgeMap { edges: edges.clone(), method: EdgeMethod::default() };
        let m = OcclusionMask { mask: mask.clone(), params: RefineParams::NONE };
        let out = masked_edges(&e, &m).unwrap();
        prop_assert!(out.edges.is_subset_of(&edges));
        prop_assert!(out.edges.is_subset_of(&mask));
    }

    #[test]
    fn gradient_edges_shrink_with_tau(depth in prop::collection::vec(0.5..4.0f64, 64), t1 in 0.001..1.0f64, t2 in 0.001..1.0f64) {
        let g = Grid::from_vec(8, 8, depth);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = depth_edges(&g, lo, 5.0).unwrap();
        let b = depth_edges(&g, hi, 5.0).unwrap();
        prop_assert!(b.edges.is_subset_of(&a.edges));
        prop_assert_eq!(depth_edges(&g, 1e9, 5.0).unwrap().edges.count_set(), 0);
    }
}

#[test]
fn radius_one_disk_is_a_plus() {
    let mut offsets = disk_offsets(1);
    offsets.sort();
    assert_eq!(offsets, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
    let mut m = Grid::filled(5, 5, false);
    m.set(2, 2, true);
    assert_eq!(dilate(&m, 1).count_set(), 5);
}

#[test]
fn tiny_tau_marks_every_nonzero_gradient() {
    let g = Grid::from_fn(6, 6, |r, c| 1.0 + if c >= 3 { 0.5 } else { 0.0 } + if r == 0 && c == 0 { 0.1 } else { 0.0 });
    let e = depth_edges(&g, 1e-12, 5.0).unwrap();
    for r in 0..6 {
        for c in 0..6 {
            let nonzero = c == 2 || c == 3 || (r == 0 && c <= 1) || (r <= 1 && c == 0);
            assert_eq!(*e.edges.get(r, c), nonzero, "({r}, {c})");
        }
    }
}

#[test]
fn canny_step_is_one_pixel_wide() {
    let depth = Grid::from_fn(24, 16, |_, c| if c < 12 { 1.0 } else { 3.0 });
    let e = canny_edges(&depth, 5.0, 15.0, 5.0).unwrap();
    for r in 2..14 {
        let row: Vec<usize> = (0..24).filter(|&c| *e.edges.get(r, c)).collect();
        assert_eq!(row.len(), 1, "row {r}: {row:?}");
        assert!(row[0] == 11 || row[0] == 12);
    }
}

#[test]
fn refine_defaults_scale_with_image() {
    assert_eq!(RefineParams::for_image(1024, 1024), RefineParams { area_min: 50, dilation_radius: 3 });
    assert_eq!(RefineParams::for_image(512, 512), RefineParams { area_min: 13, dilation_radius: 2 });
}
