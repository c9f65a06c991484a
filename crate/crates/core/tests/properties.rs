mod common;

use cote_core::corpus::{self, aggregate, RunConfig};
use cote_core::io::ssu_json::{parse_ssu_json, SsuDocument};
use cote_core::io::{DatasetManifest, GtFormat, GtPage, PredictionRecord, PredictionSet};
use cote_core::mask::{self, PixelMask};
use cote_core::synth::{self, BlockSpec, SyntheticLayoutSpec};
use cote_core::{group_regions_into_ssus, ClassMap, GroundTruthRegion, OverlapPolicy, PageCanvas, RegionGeometry};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = RegionGeometry> {
    let c = -10.0f64..70.0;
    prop_oneof![
        (c.clone(), c.clone(), c.clone(), c.clone()).prop_map(|(a, b, x, y)| RegionGeometry::bbox(
            a.min(x),
            b.min(y),
            a.max(x),
            b.max(y)
        )),
        prop::collection::vec((c.clone(), c), 3..8)
            .prop_map(|pts| RegionGeometry::polygon(pts.into_iter().map(|(x, y)| [x, y]))),
    ]
}

fn canvas() -> impl Strategy<Value = PageCanvas> {
    (1u32..64, 1u32..64).prop_map(|(w, h)| PageCanvas::new(w, h).unwrap())
}

fn bitmap(canvas: PageCanvas) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), canvas.area() as usize)
}

proptest! {
    #[test]
    fn rasterization_matches_dense_oracle(c in canvas(), g in geometry()) {
        prop_assert_eq!(g.rasterize(c).to_bitmap(), common::dense(&g, c));
    }

    #[test]
    fn set_operations_match_bitmaps((c, a, b) in canvas().prop_flat_map(|c| (Just(c), bitmap(c), bitmap(c)))) {
        let (ma, mb) = (PixelMask::from_bitmap(c, &a), PixelMask::from_bitmap(c, &b));
        let zip = |f: fn(bool, bool) -> bool| a.iter().zip(&b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
        prop_assert_eq!(ma.to_bitmap(), a.clone());
        prop_assert_eq!(ma.union(&mb).unwrap().to_bitmap(), zip(|x, y| x || y));
        prop_assert_eq!(ma.intersect(&mb).unwrap().to_bitmap(), zip(|x, y| x && y));
        prop_assert_eq!(ma.subtract(&mb).unwrap().to_bitmap(), zip(|x, y| x && !y));
        prop_assert_eq!(ma.complement().to_bitmap(), a.iter().map(|x| !x).collect::<Vec<_>>());
        prop_assert_eq!(ma.intersect_area(&mb).unwrap(), zip(|x, y| x && y).iter().filter(|v| **v).count() as u64);
    }

    #[test]
    fn stack_counts_layers((c, layers) in canvas().prop_flat_map(|c| (Just(c), prop::collection::vec(bitmap(c), 0..5)))) {
        let masks: Vec<PixelMask> = layers.iter().map(|b| PixelMask::from_bitmap(c, b)).collect();
        let stacked = mask::stack(c, &masks).unwrap();
        let mut excess = 0u64;
        for y in 0..c.height() {
            for x in 0..c.width() {
                let k = (y * c.width() + x) as usize;
                let n = layers.iter().filter(|b| b[k]).count() as u32;
                prop_assert_eq!(stacked.count_at(x, y), n);
                excess += u64::from(n.saturating_sub(1));
            }
        }
        prop_assert_eq!(stacked.multiplicity_excess_area(&PixelMask::full(c)).unwrap(), excess);
        prop_assert_eq!(stacked.binarize(), mask::union(c, &masks).unwrap());
    }

    #[test]
    fn ssu_json_round_trip(
        pages in prop::collection::vec(
            (1u32..500, 1u32..500, prop::collection::vec((geometry(), 1u32..4, prop::option::of(1i64..4), prop::option::of(1i64..4)), 0..6)),
            0..4,
        )
    ) {
        let mut classes = ClassMap::new();
        for (id, name) in [(1, "a"), (2, "b"), (3, "c")] {
            classes.insert(id, name);
        }
        let pages: Vec<GtPage> = pages
            .into_iter()
            .enumerate()
            .map(|(i, (w, h, regions))| GtPage {
                image_id: format!("p{i}"),
                canvas: PageCanvas::new(w, h).unwrap(),
                regions: regions
                    .into_iter()
                    .enumerate()
                    .map(|(k, (g, class, s, m))| GroundTruthRegion {
                        id: format!("r{k}"),
                        geometry: g,
                        class_id: class,
                        structural_id: s,
                        semantic_id: m,
                        reading_order: k as u32,
                    })
                    .collect(),
                source: None,
            })
            .collect();
        let doc = SsuDocument::from_pages(&classes, &pages).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back = parse_ssu_json(&text, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &doc);
        let manifest = back.into_manifest().unwrap();
        for (a, b) in manifest.pages.iter().zip(&pages) {
            prop_assert_eq!(&a.regions, &b.regions);
            prop_assert_eq!(a.canvas, b.canvas);
        }
    }

    #[test]
    fn synthetic_lines_inside_paragraphs(
        blocks in prop::collection::vec(prop::collection::vec((1u32..5, 4u32..16, 0u32..6, any::<bool>()), 1..4), 1..4),
        ragged in 0.1f64..=1.0,
        seed in any::<u64>(),
    ) {
        let spec = SyntheticLayoutSpec {
            width: 1000,
            height: 1000,
            margin: 10,
            gutter: 12,
            block_gap: 8,
            columns: blocks
                .into_iter()
                .map(|col| col.into_iter().map(|(lines, line_height, line_gap, title)| BlockSpec { lines, line_height, line_gap, title }).collect())
                .collect(),
            ragged_min: ragged,
            seed,
        };
        let layout = synth::generate_layout(&spec).unwrap();
        prop_assert_eq!(&layout, &synth::generate_layout(&spec).unwrap());
        let c = layout.canvas;
        let line_masks: Vec<_> = layout.lines.iter().map(|l| l.geometry.rasterize(c)).collect();
        for (lm, &p) in line_masks.iter().zip(&layout.paragraph_of) {
            prop_assert!(lm.subtract(&layout.paragraphs[p].geometry.rasterize(c)).unwrap().is_empty());
        }
        // lines never overlap each other
        let total: u64 = line_masks.iter().map(|m| m.area()).sum();
        prop_assert_eq!(mask::union(c, &line_masks).unwrap().area(), total);
        let lines = layout.line_page().unwrap();
        let paras = layout.paragraph_page().unwrap();
        prop_assert_eq!(lines.ssus().len(), paras.ssus().len());
        for (l, p) in lines.ssus().iter().zip(paras.ssus()) {
            prop_assert!(l.mask.subtract(&p.mask).unwrap().is_empty());
        }
    }
}

fn scene_dataset(seeds: std::ops::Range<u64>) -> (DatasetManifest, PredictionSet) {
    let mut pages = Vec::new();
    let mut records = Vec::new();
    for seed in seeds {
        let s = common::random_scene(
            seed,
            common::SceneLimits {
                max_side: 120,
                ..Default::default()
            },
        );
        let id = format!("img{seed:03}");
        records.extend(s.preds.iter().map(|p| PredictionRecord {
            id: p.id.clone(),
            image_id: id.clone(),
            geometry: p.geometry.clone(),
            class_id: p.class_id,
            score: p.score,
        }));
        pages.push(GtPage {
            image_id: id,
            canvas: s.canvas,
            regions: s.regions,
            source: None,
        });
    }
    let mut classes = ClassMap::new();
    for id in 1..=3 {
        classes.insert(id, format!("c{id}"));
    }
    let manifest = DatasetManifest {
        format: GtFormat::SsuJson,
        classes,
        pages,
        warnings: Vec::new(),
    };
    (manifest, PredictionSet::from_records(records))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn aggregate_is_permutation_invariant(start in 0u64..10_000, perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (manifest, preds) = scene_dataset(start..start + 6);
        let r = corpus::evaluate_dataset(&manifest, &preds, &RunConfig::default()).unwrap();
        let mut pages = r.pages.clone();
        pages.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let again = aggregate(&pages, r.aggregate.n_skipped);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        prop_assert!(close(again.cote, r.aggregate.cote));
        prop_assert!(close(again.coverage, r.aggregate.coverage));
        prop_assert!(close(again.trespass, r.aggregate.trespass));

        let mut shuffled = manifest.clone();
        shuffled.pages.reverse();
        let r2 = corpus::evaluate_dataset(&shuffled, &preds, &RunConfig::default()).unwrap();
        prop_assert_eq!(r2.pages, r.pages);
    }

    #[test]
    fn ssu_modes_share_coverage_and_excess(start in 0u64..10_000) {
        let (manifest, preds) = scene_dataset(start..start + 3);
        let cmp = corpus::compare_ssu_modes_dataset(&manifest, &preds, &RunConfig::default()).unwrap();
        for (l, f) in cmp.labelled.pages.iter().zip(&cmp.fallback.pages) {
            prop_assert_eq!(l.cote.coverage.to_bits(), f.cote.coverage.to_bits());
            prop_assert_eq!(l.cote.excess.to_bits(), f.cote.excess.to_bits());
            prop_assert!(f.cote.trespass >= l.cote.trespass);
        }
    }
}

#[test]
fn clip_policy_keeps_ssus_disjoint() {
    for seed in 0..50 {
        let s = common::random_scene(seed, common::SceneLimits::default());
        let page = group_regions_into_ssus(&s.regions, s.canvas, OverlapPolicy::ClipToEarlier).unwrap();
        let sum: u64 = page.ssus().iter().map(|x| x.mask.area()).sum();
        assert_eq!(sum, page.gt_area());
        assert_eq!(page.composite_mask().area(), page.gt_area());
    }
}
