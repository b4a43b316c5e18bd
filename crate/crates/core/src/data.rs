//! Dataset loading, preprocessing and synthesis. Every emitted feature lies
//! in [0, 1] and labels run contiguously from 0.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::FeatureMatrix;

/// Labelled rows of features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// One line describing source and preprocessing.
    pub provenance: String,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn matrix(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::from_rows(&self.features)
    }

    /// Checks the shape, range and label invariants.
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                actual: self.labels.len(),
            });
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != self.n_features() {
                return Err(Error::data(format!(
                    "{}: row {i} has {} features",
                    self.name,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::data(format!(
                    "{}: row {i} has feature {v} outside [0, 1]",
                    self.name
                )));
            }
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::data(format!(
                "{}: label {l} ≥ {} classes",
                self.name, self.n_classes
            )));
        }
        Ok(())
    }

    /// Provenance comment line, header `f…,label`, then one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "# {}: {}", self.name, self.provenance).map_err(io)?;
        writeln!(w, "{},label", self.feature_names.join(",")).map_err(io)?;
        for (row, l) in self.features.iter().zip(&self.labels) {
            for v in row {
                write!(w, "{v:e},").map_err(io)?;
            }
            writeln!(w, "{l}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Samples presented to a reservoir as ordered steps of `step_width` values.
/// Row `i` of `data.features` is the flattened step list of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialDataset {
    pub data: Dataset,
    pub step_width: usize,
    /// Consecutive samples are consecutive intervals of one long run
    /// rather than independent runs.
    pub continuous: bool,
}

impl SequentialDataset {
    pub fn from_dataset(data: Dataset, step_width: usize) -> Result<Self> {
        if step_width == 0 || data.n_features() % step_width != 0 {
            return Err(Error::data(format!(
                "{} features do not split into steps of {step_width}",
                data.n_features()
            )));
        }
        Ok(Self {
            data,
            step_width,
            continuous: false,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.data.n_features() / self.step_width
    }

    pub fn steps(&self, sample: usize) -> std::slice::Chunks<'_, f64> {
        self.data.features[sample].chunks(self.step_width)
    }

    /// Steps of a two-wide sample as input pairs.
    pub fn pairs(&self, sample: usize) -> Result<Vec<(f64, f64)>> {
        if self.step_width != 2 {
            return Err(Error::data(format!("steps are {} wide, not pairs", self.step_width)));
        }
        Ok(self.steps(sample).map(|s| (s[0], s[1])).collect())
    }
}

fn reader(path: &Path, has_header: bool) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => Error::io(path, e),
            k => Error::data(format!("{}: {k:?}", path.display())),
        })
}

fn number(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::data(format!("{}:{line}: not a number: {s:?}", path.display())))
}

fn source(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Next-move classification from daily closes: each sample is the day's
/// min-max scaled percentage move, labelled 1 iff the following move is
/// positive. The final move has no successor and is dropped.
pub fn load_stock(path: &Path, has_header: bool) -> Result<SequentialDataset> {
    let mut dates: Vec<String> = Vec::new();
    let mut closes = Vec::new();
    for (i, rec) in reader(path, has_header)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(Error::data(format!(
                "{}:{}: need date and close",
                path.display(),
                i + 1
            )));
        }
        dates.push(rec[0].to_owned());
        closes.push(number(&rec[1], path, i + 1)?);
    }
    stock_from_closes(&dates, &closes, &source(path))
}

/// [`load_stock`] on in-memory ISO-8601 dates and closes.
pub fn stock_from_closes(dates: &[String], closes: &[f64], name: &str) -> Result<SequentialDataset> {
    if closes.len() < 3 || dates.len() != closes.len() {
        return Err(Error::data(format!(
            "{name}: need ≥ 3 dated closes, got {}",
            closes.len()
        )));
    }
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::data(format!(
            "{name}: dates not strictly increasing at {}",
            w[1]
        )));
    }
    if let Some(c) = closes.iter().find(|&&c| !(c > 0.0)) {
        return Err(Error::data(format!("{name}: non-positive close {c}")));
    }
    let pct: Vec<f64> = closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    let lo = pct.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = pct
        .iter()
        .map(|&p| {
            if hi > lo {
                ((p - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect();
    let n = pct.len() - 1;
    let data = Dataset {
        name: "stock".into(),
        provenance: format!(
            "{name}; {} closes {}..{}; percentage moves min-max scaled; label = next move positive",
            closes.len(),
            dates[0],
            dates[dates.len() - 1]
        ),
        feature_names: vec!["move".into()],
        features: scaled[..n].iter().map(|&v| vec![v]).collect(),
        labels: pct[1..].iter().map(|&p| usize::from(p > 0.0)).collect(),
        n_classes: 2,
    };
    Ok(SequentialDataset {
        data,
        step_width: 1,
        continuous: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrisClasses {
    SetosaVersicolor,
    VersicolorVirginica,
    All,
}

impl IrisClasses {
    fn species(self) -> &'static [usize] {
        match self {
            IrisClasses::SetosaVersicolor => &[0, 1],
            IrisClasses::VersicolorVirginica => &[1, 2],
            IrisClasses::All => &[0, 1, 2],
        }
    }
}

impl FromStr for IrisClasses {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "setosa-versicolor" | "versicolor-setosa" => Ok(IrisClasses::SetosaVersicolor),
            "versicolor-virginica" | "virginica-versicolor" => Ok(IrisClasses::VersicolorVirginica),
            "all" => Ok(IrisClasses::All),
            _ => Err(Error::data(format!("unknown iris class subset {s:?}"))),
        }
    }
}

/// Which (length, width) measurement pair to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrisFeatures {
    Sepal,
    Petal,
}

impl FromStr for IrisFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sepal" => Ok(IrisFeatures::Sepal),
            "petal" => Ok(IrisFeatures::Petal),
            _ => Err(Error::data(format!("unknown iris feature pair {s:?}"))),
        }
    }
}

fn iris_species(name: &str) -> Option<usize> {
    let n = name.to_ascii_lowercase();
    let n = n.strip_prefix("iris-").unwrap_or(&n);
    match n {
        "setosa" => Some(0),
        "versicolor" | "versicolour" => Some(1),
        "virginica" => Some(2),
        _ => None,
    }
}

/// Iris rows of the chosen classes as (length, 1 − width) pairs, both
/// scaled by their maximum over the full table.
pub fn load_iris(path: &Path, classes: IrisClasses, features: IrisFeatures, has_header: bool) -> Result<Dataset> {
    let (lc, wc) = match features {
        IrisFeatures::Sepal => (0, 1),
        IrisFeatures::Petal => (2, 3),
    };
    let mut rows = Vec::new();
    for (i, rec) in reader(path, has_header)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if rec.len() != 5 {
            return Err(Error::data(format!("{}:{}: expected 5 columns", path.display(), i + 1)));
        }
        let species = iris_species(&rec[4])
            .ok_or_else(|| Error::data(format!("{}:{}: unknown species {:?}", path.display(), i + 1, &rec[4])))?;
        rows.push((number(&rec[lc], path, i + 1)?, number(&rec[wc], path, i + 1)?, species));
    }
    let lmax = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let wmax = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if !(lmax > 0.0 && wmax > 0.0) {
        return Err(Error::data(format!("{}: no positive measurements", path.display())));
    }
    let keep = classes.species();
    let mut out = Dataset {
        name: "iris".into(),
        provenance: format!(
            "{}; {classes:?} {features:?}; length/max, 1 - width/max (max over all {} rows)",
            source(path),
            rows.len()
        ),
        feature_names: vec!["length".into(), "inverted_width".into()],
        features: Vec::new(),
        labels: Vec::new(),
        n_classes: keep.len(),
    };
    for (l, w, s) in rows {
        if let Some(label) = keep.iter().position(|&k| k == s) {
            out.features.push(vec![l / lmax, 1.0 - w / wmax]);
            out.labels.push(label);
        }
    }
    Ok(out)
}

/// Number of numeric Statlog attributes; the pairing into steps relies on it.
pub const STATLOG_NUMERIC: usize = 12;

/// German credit in the 24-attribute numeric layout. Keeps the columns
/// holding more than two distinct values, scales each by its maximum, and
/// presents them as six ordered pairs. Label 0 is good risk, 1 bad.
pub fn load_statlog(path: &Path, has_header: bool) -> Result<SequentialDataset> {
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 24];
    let mut labels = Vec::new();
    for (i, rec) in reader(path, has_header)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        // whitespace-separated files arrive as one field
        let fields: Vec<&str> = if rec.len() == 1 {
            rec[0].split_whitespace().collect()
        } else {
            rec.iter().collect()
        };
        if fields.len() != 25 {
            return Err(Error::data(format!(
                "{}:{}: expected 25 columns, got {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        for (c, f) in fields[..24].iter().enumerate() {
            cols[c].push(number(f, path, i + 1)?);
        }
        labels.push(match fields[24] {
            "1" => 0,
            "2" => 1,
            l => {
                return Err(Error::data(format!(
                    "{}:{}: label {l:?} is not 1 or 2",
                    path.display(),
                    i + 1
                )))
            }
        });
    }
    let numeric: Vec<usize> = (0..24)
        .filter(|&c| {
            let mut v = cols[c].clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len() > 2
        })
        .collect();
    if numeric.len() != STATLOG_NUMERIC {
        return Err(Error::data(format!(
            "{}: {} columns have more than two distinct values, expected {STATLOG_NUMERIC}",
            path.display(),
            numeric.len()
        )));
    }
    let mut maxes = Vec::with_capacity(numeric.len());
    for &c in &numeric {
        let max = cols[c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) || cols[c].iter().any(|&v| v < 0.0) {
            return Err(Error::data(format!(
                "{}: column {} is not non-negative with a positive max",
                path.display(),
                c + 1
            )));
        }
        maxes.push(max);
    }
    let features = (0..labels.len())
        .map(|r| numeric.iter().zip(&maxes).map(|(&c, m)| cols[c][r] / m).collect())
        .collect();
    let data = Dataset {
        name: "statlog".into(),
        provenance: format!(
            "{}; columns {:?} (>2 distinct values) scaled by max; paired in order",
            source(path),
            numeric.iter().map(|c| c + 1).collect::<Vec<_>>()
        ),
        feature_names: numeric.iter().map(|c| format!("a{}", c + 1)).collect(),
        features,
        labels,
        n_classes: 2,
    };
    SequentialDataset::from_dataset(data, 2)
}

/// Smallest allowed distance between two class centres.
pub const DIMRED_MIN_SEPARATION: f64 = 0.3;

/// Index of the nearest centre; ties go to the lowest index.
pub fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Uniform points in the unit cube labelled by their nearest of
/// `n_classes` random centres. Returns the dataset and the centres.
pub fn gen_dimred(
    seed: u64,
    n_samples: usize,
    n_classes: usize,
    n_features: usize,
) -> Result<(Dataset, Vec<Vec<f64>>)> {
    if n_classes == 0 || n_features == 0 || n_samples < n_classes {
        return Err(Error::config(format!(
            "need n_samples ≥ n_classes ≥ 1 and features ≥ 1, got {n_samples}, {n_classes}, {n_features}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| (0..n_features).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    let centers = loop {
        let c: Vec<Vec<f64>> = (0..n_classes).map(|_| draw(&mut rng)).collect();
        let separated = (0..n_classes).all(|a| {
            (a + 1..n_classes).all(|b| {
                c[a].iter()
                    .zip(&c[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
                    >= DIMRED_MIN_SEPARATION
            })
        });
        if separated {
            break c;
        }
    };
    let features: Vec<Vec<f64>> = (0..n_samples).map(|_| draw(&mut rng)).collect();
    let labels = features.iter().map(|x| nearest_center(x, &centers)).collect();
    let data = Dataset {
        name: "dimred".into(),
        provenance: format!(
            "generated, seed {seed}; {n_samples} uniform points in [0,1]^{n_features}, nearest of {n_classes} centres"
        ),
        feature_names: (0..n_features).map(|j| format!("x{j}")).collect(),
        features,
        labels,
        n_classes,
    };
    Ok((data, centers))
}
