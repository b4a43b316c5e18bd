use std::io::Write;
use std::path::Path;

use proptest::prelude::*;

use magnon_rc::data::{
    gen_dimred, load_iris, load_statlog, nearest_center, stock_from_closes, IrisClasses, IrisFeatures,
    DIMRED_MIN_SEPARATION,
};

fn dates(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("2000-01-{i:04}")).collect()
}

fn iris_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iris.data"))
}

#[test]
fn iris_features_in_unit_interval() {
    for classes in [
        IrisClasses::SetosaVersicolor,
        IrisClasses::VersicolorVirginica,
        IrisClasses::All,
    ] {
        for features in [IrisFeatures::Petal, IrisFeatures::Sepal] {
            let d = load_iris(iris_path(), classes, features, false).unwrap();
            assert!(d.features.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stock_features_in_unit_interval(closes in prop::collection::vec(1.0..500.0f64, 3..200)) {
        let d = stock_from_closes(&dates(closes.len()), &closes, "t").unwrap();
        prop_assert!(d.data.features.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(d.data.len(), closes.len() - 2);
    }

    /// Label i is the sign of move i + 1, and feature i is move i.
    #[test]
    fn stock_label_is_next_move(closes in prop::collection::vec(1.0..500.0f64, 3..200)) {
        let d = stock_from_closes(&dates(closes.len()), &closes, "t").unwrap();
        let pct: Vec<f64> = closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
        for i in 0..d.data.len() {
            prop_assert_eq!(d.data.labels[i], usize::from(pct[i + 1] > 0.0));
        }
        // scaled features are a monotone image of the moves they stand for
        for i in 1..d.data.len() {
            let (a, b) = (d.data.features[i - 1][0], d.data.features[i][0]);
            prop_assert!((pct[i - 1] < pct[i]) <= (a <= b));
        }
    }

    /// Appending a future day whose move lies inside the range already seen
    /// changes nothing that was known before it.
    #[test]
    fn stock_future_does_not_leak(closes in prop::collection::vec(1.0..500.0f64, 4..100), pick in 0.0..1.0f64) {
        let pct: Vec<f64> = closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
        let lo = pct.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mv = lo + pick * (hi - lo);
        let mut longer = closes.clone();
        longer.push(closes[closes.len() - 1] * (1.0 + mv));
        let a = stock_from_closes(&dates(closes.len()), &closes, "t").unwrap();
        let b = stock_from_closes(&dates(longer.len()), &longer, "t").unwrap();
        for i in 0..a.data.len() {
            prop_assert!((a.data.features[i][0] - b.data.features[i][0]).abs() < 1e-12);
            prop_assert_eq!(a.data.labels[i], b.data.labels[i]);
        }
    }

    /// Flattening the stacked pairs gives back the scaled numeric columns in
    /// file order.
    #[test]
    fn statlog_pairing_is_a_bijection(
        seed in any::<u64>(),
        rows in 5usize..40,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // 12 many-valued columns scattered among 12 binary ones
        let mut kinds: Vec<bool> = (0..24).map(|i| i % 2 == 0).collect();
        for i in (1..24).rev() {
            kinds.swap(i, rng.random_range(0..=i));
        }
        let mut table: Vec<Vec<u32>> = (0..rows)
            .map(|_| kinds.iter().map(|&many| if many { rng.random_range(1..80) } else { rng.random_range(0..2) }).collect())
            .collect();
        // guarantee three distinct values in every many-valued column
        for (c, &many) in kinds.iter().enumerate() {
            if many {
                for r in 0..3 {
                    table[r][c] = 90 + r as u32;
                }
            }
        }
        let labels: Vec<u32> = (0..rows).map(|_| rng.random_range(1..=2)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        for (row, l) in table.iter().zip(&labels) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{},{l}", cells.join(",")).unwrap();
        }
        drop(f);

        let d = load_statlog(&path, false).unwrap();
        prop_assert_eq!(d.n_steps(), 6);
        let numeric: Vec<usize> = (0..24).filter(|&c| kinds[c]).collect();
        for r in 0..rows {
            let flat: Vec<f64> = d.pairs(r).unwrap().iter().flat_map(|&(a, b)| [a, b]).collect();
            for (k, &c) in numeric.iter().enumerate() {
                let max = table.iter().map(|row| row[c]).max().unwrap() as f64;
                prop_assert!((flat[k] - table[r][c] as f64 / max).abs() < 1e-12);
            }
            prop_assert_eq!(d.data.labels[r], (labels[r] - 1) as usize);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dimred_labels_and_separation(seed in any::<u64>(), n in 3usize..200, classes in 2usize..5) {
        let (d, centers) = gen_dimred(seed, n, classes, 4).unwrap();
        prop_assert!(d.features.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        for (x, &l) in d.features.iter().zip(&d.labels) {
            prop_assert_eq!(nearest_center(x, &centers), l);
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let dist: f64 = centers[i].iter().zip(&centers[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(dist >= DIMRED_MIN_SEPARATION);
            }
        }
        let (again, _) = gen_dimred(seed, n, classes, 4).unwrap();
        prop_assert_eq!(again.features, d.features);
    }

    /// Nearest-centre regions are convex: points on the segment between two
    /// same-label samples keep the label.
    #[test]
    fn dimred_regions_are_convex(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let (d, centers) = gen_dimred(seed, 200, 3, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut checked = 0;
        while checked < 100 {
            let (i, j) = (rng.random_range(0..d.len()), rng.random_range(0..d.len()));
            if d.labels[i] != d.labels[j] {
                continue;
            }
            checked += 1;
            for t in [0.25, 0.5, 0.75] {
                let p: Vec<f64> = d.features[i].iter().zip(&d.features[j]).map(|(a, b)| a + t * (b - a)).collect();
                prop_assert_eq!(nearest_center(&p, &centers), d.labels[i]);
            }
        }
    }
}
