//! Core-sample data model, CSV ingestion, feature encoding and z-score scaling.

use std::collections::HashSet;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::num::Real;

/// Lithology lexicon mapping a textual description to an average grain size in mm.
pub const LITHOLOGY_LEXICON: [(&str, f64); 7] = [
    ("gravel", 1.0),
    ("coarse sand", 0.5),
    ("medium sand", 0.25),
    ("fine sand", 0.1),
    ("coarse silt", 0.05),
    ("fine silt", 0.01),
    ("clay", 0.005),
];

pub const GRAIN_SIZE_MIN_MM: f64 = 0.005;
pub const GRAIN_SIZE_MAX_MM: f64 = 1.0;

/// Converts a lithology term (case-insensitive) to its average grain size in mm.
pub fn grain_size_from_lithology(term: &str) -> Result<f64> {
    let needle = term.trim().to_lowercase();
    let needle = needle.split_whitespace().collect::<Vec<_>>().join(" ");
    LITHOLOGY_LEXICON
        .iter()
        .find(|(name, _)| *name == needle)
        .map(|&(_, mm)| mm)
        .ok_or_else(|| Error::UnknownLithology {
            term: term.to_string(),
            accepted: LITHOLOGY_LEXICON
                .iter()
                .map(|(name, _)| *name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

/// Salt mass concentration from the sample mass before (`m0`) and after ablation.
pub fn salt_concentration_from_masses(m0: f64, m_after: f64) -> Result<f64> {
    if !(m0 > 0.0) || !(m_after > 0.0) {
        return Err(Error::invalid(format!(
            "sample masses must be positive (m0 = {m0}, m_after = {m_after})"
        )));
    }
    if m_after > m0 {
        return Err(Error::invalid(format!(
            "mass after ablation {m_after} exceeds initial mass {m0}"
        )));
    }
    Ok((m0 - m_after) / m0)
}

/// Label vocabulary for the two categorical features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLabels {
    pub colors: [String; 6],
    pub horizons: [String; 3],
}

impl Default for CategoryLabels {
    fn default() -> Self {
        Self {
            colors: ["gray", "light-gray", "brown", "red", "green", "mottled"].map(String::from),
            horizons: ["h1", "h2", "h3"].map(String::from),
        }
    }
}

impl CategoryLabels {
    pub fn color_slot(&self, label: &str) -> Option<usize> {
        slot(&self.colors, label)
    }

    pub fn horizon_slot(&self, label: &str) -> Option<usize> {
        slot(&self.horizons, label)
    }
}

fn slot(labels: &[String], label: &str) -> Option<usize> {
    let label = label.trim();
    labels.iter().position(|l| l.eq_ignore_ascii_case(label))
}

/// One core plug: routine measurements plus optional post-ablation targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreSample {
    pub sample_id: String,
    pub sample_depth: f64,
    pub formation_top_depth: f64,
    pub formation_bottom_depth: f64,
    /// percent
    pub porosity_initial: f64,
    /// millidarcy
    pub permeability_initial: f64,
    /// g/cc
    pub density_initial: f64,
    /// millimeters
    pub grain_size: f64,
    pub color: String,
    pub horizon: String,
    /// g/g
    pub salt_concentration: Option<f64>,
    /// percent
    pub porosity_after: Option<f64>,
    /// millidarcy
    pub permeability_after: Option<f64>,
}

impl CoreSample {
    /// Checks the physical invariants; returns a description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let all = [
            self.sample_depth,
            self.formation_top_depth,
            self.formation_bottom_depth,
            self.porosity_initial,
            self.permeability_initial,
            self.density_initial,
            self.grain_size,
        ];
        if all.iter().any(|v| !v.is_finite())
            || [
                self.salt_concentration,
                self.porosity_after,
                self.permeability_after,
            ]
            .iter()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err("non-finite value".into());
        }
        if !(self.formation_top_depth <= self.sample_depth
            && self.sample_depth <= self.formation_bottom_depth)
        {
            return Err(format!(
                "sample depth {} outside formation interval [{}, {}]",
                self.sample_depth, self.formation_top_depth, self.formation_bottom_depth
            ));
        }
        if !(0.0..=100.0).contains(&self.porosity_initial) {
            return Err(format!(
                "porosity_initial {} outside [0, 100]",
                self.porosity_initial
            ));
        }
        if let Some(phi) = self.porosity_after {
            if !(0.0..=100.0).contains(&phi) {
                return Err(format!("porosity_after {phi} outside [0, 100]"));
            }
            if phi < self.porosity_initial {
                return Err(format!(
                    "porosity_after {phi} below porosity_initial {}",
                    self.porosity_initial
                ));
            }
        }
        if !(self.permeability_initial > 0.0) {
            return Err(format!(
                "permeability_initial {} must be positive",
                self.permeability_initial
            ));
        }
        if let Some(k) = self.permeability_after {
            if k < self.permeability_initial {
                return Err(format!(
                    "permeability_after {k} below permeability_initial {}",
                    self.permeability_initial
                ));
            }
        }
        if let Some(c) = self.salt_concentration {
            if !(0.0..1.0).contains(&c) {
                return Err(format!("salt_concentration {c} outside [0, 1)"));
            }
        }
        if !(self.density_initial > 0.0) {
            return Err(format!(
                "density_initial {} must be positive",
                self.density_initial
            ));
        }
        if !(GRAIN_SIZE_MIN_MM..=GRAIN_SIZE_MAX_MM).contains(&self.grain_size) {
            return Err(format!(
                "grain_size {} outside [{GRAIN_SIZE_MIN_MM}, {GRAIN_SIZE_MAX_MM}]",
                self.grain_size
            ));
        }
        Ok(())
    }
}

/// Ordered collection of samples with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<CoreSample>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(samples: Vec<CoreSample>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, s) in samples.iter().enumerate() {
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("duplicate sample_id {:?}", s.sample_id),
                });
            }
        }
        Ok(Self {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Values of `target` for every sample, or an error naming the first sample lacking it.
    pub fn target_values(&self, target: Target) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                target.value(s).ok_or_else(|| Error::Row {
                    row: i + 1,
                    message: format!("missing target {}", target.name()),
                })
            })
            .collect()
    }

    /// Copy of the dataset with every sample's salt concentration removed.
    pub fn without_salt(&self) -> Dataset {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.salt_concentration = None;
        }
        out
    }
}

/// The three predicted quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    PorosityAfter,
    PermeabilityAfter,
    SaltConcentration,
}

impl Target {
    pub const ALL: [Target; 3] = [
        Target::PorosityAfter,
        Target::PermeabilityAfter,
        Target::SaltConcentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::PorosityAfter => "porosity_after",
            Target::PermeabilityAfter => "permeability_after",
            Target::SaltConcentration => "salt_concentration",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == name.trim())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown target {name:?}; expected porosity_after, permeability_after or salt_concentration"
                ))
            })
    }

    pub fn value(self, s: &CoreSample) -> Option<f64> {
        match self {
            Target::PorosityAfter => s.porosity_after,
            Target::PermeabilityAfter => s.permeability_after,
            Target::SaltConcentration => s.salt_concentration,
        }
    }

    /// Value of the same property before ablation, when the target has one.
    pub fn initial_value(self, s: &CoreSample) -> Option<f64> {
        match self {
            Target::PorosityAfter => Some(s.porosity_initial),
            Target::PermeabilityAfter => Some(s.permeability_initial),
            Target::SaltConcentration => None,
        }
    }

    /// Whether the measured salt concentration is an input feature for this target.
    pub fn uses_salt_feature(self) -> bool {
        !matches!(self, Target::SaltConcentration)
    }
}

pub mod columns {
    pub const SAMPLE_ID: &str = "sample_id";
    pub const SAMPLE_DEPTH: &str = "sample_depth_m";
    pub const FORMATION_TOP: &str = "formation_top_depth_m";
    pub const FORMATION_BOTTOM: &str = "formation_bottom_depth_m";
    pub const POROSITY_INITIAL: &str = "porosity_initial_pct";
    pub const PERMEABILITY_INITIAL: &str = "permeability_initial_md";
    pub const DENSITY_INITIAL: &str = "density_initial_gcc";
    pub const GRAIN_SIZE: &str = "grain_size_mm";
    pub const LITHOLOGY_TERM: &str = "lithology_term";
    pub const COLOR: &str = "color";
    pub const HORIZON: &str = "horizon";
    pub const SALT: &str = "salt_concentration_gg";
    pub const POROSITY_AFTER: &str = "porosity_after_pct";
    pub const PERMEABILITY_AFTER: &str = "permeability_after_md";

    pub const REQUIRED: [&str; 9] = [
        SAMPLE_ID,
        SAMPLE_DEPTH,
        FORMATION_TOP,
        FORMATION_BOTTOM,
        POROSITY_INITIAL,
        PERMEABILITY_INITIAL,
        DENSITY_INITIAL,
        COLOR,
        HORIZON,
    ];
    pub const OPTIONAL: [&str; 3] = [SALT, POROSITY_AFTER, PERMEABILITY_AFTER];
}

/// Parses a dataset using the default label vocabulary.
pub fn parse_csv<R: Read>(source: R) -> Result<Dataset> {
    parse_csv_with_labels(source, &CategoryLabels::default())
}

pub fn parse_csv_with_labels<R: Read>(source: R, labels: &CategoryLabels) -> Result<Dataset> {
    use columns::*;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();

    let known: Vec<&str> = REQUIRED
        .iter()
        .chain(OPTIONAL.iter())
        .chain([GRAIN_SIZE, LITHOLOGY_TERM].iter())
        .copied()
        .collect();
    for h in &headers {
        if !known.contains(&h.as_str()) {
            return Err(Error::Csv(format!("unknown column {h:?}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    for name in REQUIRED {
        if col(name).is_none() {
            return Err(Error::Csv(format!("missing required column {name:?}")));
        }
    }
    let grain_col = col(GRAIN_SIZE);
    let litho_col = col(LITHOLOGY_TERM);
    if grain_col.is_some() == litho_col.is_some() {
        return Err(Error::Csv(format!(
            "exactly one of {GRAIN_SIZE:?} and {LITHOLOGY_TERM:?} must be present"
        )));
    }

    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Csv(e.to_string()))?;

    // An optional column whose cells are all empty counts as absent.
    let optional_present = |name: &str| -> Option<usize> {
        let c = col(name)?;
        records
            .iter()
            .any(|r| !r.get(c).unwrap_or("").is_empty())
            .then_some(c)
    };
    let salt_col = optional_present(SALT);
    let phi_col = optional_present(POROSITY_AFTER);
    let k_col = optional_present(PERMEABILITY_AFTER);

    let mut samples = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let text = |name: &str| -> Result<&str> {
            let v = cell(col(name).expect("required column checked"));
            if v.is_empty() {
                Err(Error::Row {
                    row,
                    message: format!("missing value for {name}"),
                })
            } else {
                Ok(v)
            }
        };
        let number_at = |c: usize, name: &str| -> Result<f64> {
            let v = cell(c);
            if v.is_empty() {
                return Err(Error::Row {
                    row,
                    message: format!("missing value for {name}"),
                });
            }
            v.parse::<f64>().map_err(|_| Error::Row {
                row,
                message: format!("non-numeric value {v:?} for {name}"),
            })
        };
        let number = |name: &str| number_at(col(name).expect("required column checked"), name);
        let optional = |c: Option<usize>, name: &str| c.map(|c| number_at(c, name)).transpose();

        let grain_size = match (grain_col, litho_col) {
            (Some(c), _) => number_at(c, GRAIN_SIZE)?,
            (_, Some(c)) => {
                let term = cell(c);
                grain_size_from_lithology(term).map_err(|e| Error::Row {
                    row,
                    message: e.to_string(),
                })?
            }
            _ => unreachable!(),
        };
        let color = text(COLOR)?;
        let color = labels
            .color_slot(color)
            .map(|s| labels.colors[s].clone())
            .ok_or_else(|| Error::Row {
                row,
                message: format!(
                    "unknown color {color:?}; expected one of {}",
                    labels.colors.join(", ")
                ),
            })?;
        let horizon = text(HORIZON)?;
        let horizon = labels
            .horizon_slot(horizon)
            .map(|s| labels.horizons[s].clone())
            .ok_or_else(|| Error::Row {
                row,
                message: format!(
                    "unknown horizon {horizon:?}; expected one of {}",
                    labels.horizons.join(", ")
                ),
            })?;

        let sample = CoreSample {
            sample_id: text(SAMPLE_ID)?.to_string(),
            sample_depth: number(SAMPLE_DEPTH)?,
            formation_top_depth: number(FORMATION_TOP)?,
            formation_bottom_depth: number(FORMATION_BOTTOM)?,
            porosity_initial: number(POROSITY_INITIAL)?,
            permeability_initial: number(PERMEABILITY_INITIAL)?,
            density_initial: number(DENSITY_INITIAL)?,
            grain_size,
            color,
            horizon,
            salt_concentration: optional(salt_col, SALT)?,
            porosity_after: optional(phi_col, POROSITY_AFTER)?,
            permeability_after: optional(k_col, PERMEABILITY_AFTER)?,
        };
        sample
            .validate()
            .map_err(|message| Error::Row { row, message })?;
        samples.push(sample);
    }
    Dataset::new(samples, "csv")
}

/// Writes the canonical CSV form. Optional columns are written when every sample
/// carries the value and omitted when none does.
pub fn write_csv<W: Write>(ds: &Dataset, sink: W) -> Result<()> {
    use columns::*;

    let presence = |f: fn(&CoreSample) -> Option<f64>, name: &str| -> Result<bool> {
        let count = ds.samples.iter().filter(|s| f(s).is_some()).count();
        match count {
            0 => Ok(false),
            c if c == ds.len() => Ok(true),
            _ => Err(Error::invalid(format!(
                "column {name} is only partially populated"
            ))),
        }
    };
    let with_salt = presence(|s| s.salt_concentration, SALT)?;
    let with_phi = presence(|s| s.porosity_after, POROSITY_AFTER)?;
    let with_k = presence(|s| s.permeability_after, PERMEABILITY_AFTER)?;

    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec![
        SAMPLE_ID,
        SAMPLE_DEPTH,
        FORMATION_TOP,
        FORMATION_BOTTOM,
        POROSITY_INITIAL,
        PERMEABILITY_INITIAL,
        DENSITY_INITIAL,
        GRAIN_SIZE,
        COLOR,
        HORIZON,
    ];
    if with_salt {
        header.push(SALT);
    }
    if with_phi {
        header.push(POROSITY_AFTER);
    }
    if with_k {
        header.push(PERMEABILITY_AFTER);
    }
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;
    for s in &ds.samples {
        let mut rec = vec![
            s.sample_id.clone(),
            s.sample_depth.to_string(),
            s.formation_top_depth.to_string(),
            s.formation_bottom_depth.to_string(),
            s.porosity_initial.to_string(),
            s.permeability_initial.to_string(),
            s.density_initial.to_string(),
            s.grain_size.to_string(),
            s.color.clone(),
            s.horizon.clone(),
        ];
        for (flag, v) in [
            (with_salt, s.salt_concentration),
            (with_phi, s.porosity_after),
            (with_k, s.permeability_after),
        ] {
            if flag {
                rec.push(v.expect("presence checked").to_string());
            }
        }
        writer.write_record(&rec).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Column layout of an encoded design matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub column_names: Vec<String>,
    pub include_salt: bool,
}

/// Number of numeric (non-indicator) columns excluding salt.
pub const NUMERIC_WIDTH: usize = 7;

impl FeatureSchema {
    pub fn new(include_salt: bool, labels: &CategoryLabels) -> Self {
        use columns::*;
        let mut column_names: Vec<String> = Vec::new();
        if include_salt {
            column_names.push(SALT.into());
        }
        column_names.extend(
            [
                FORMATION_TOP,
                FORMATION_BOTTOM,
                POROSITY_INITIAL,
                PERMEABILITY_INITIAL,
                SAMPLE_DEPTH,
                DENSITY_INITIAL,
                GRAIN_SIZE,
            ]
            .map(String::from),
        );
        column_names.extend(labels.colors.iter().map(|c| format!("color={c}")));
        column_names.extend(labels.horizons.iter().map(|h| format!("horizon={h}")));
        Self {
            column_names,
            include_salt,
        }
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    /// Index of the first color indicator column.
    pub fn color_offset(&self) -> usize {
        NUMERIC_WIDTH + usize::from(self.include_salt)
    }

    pub fn horizon_offset(&self) -> usize {
        self.color_offset() + 6
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Numerically encoded design matrix with an optional target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub rows: Array2<f64>,
    pub targets: Option<Array1<f64>>,
    pub target_name: String,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Attaches the target vector read from `ds` (which must be the dataset that was encoded).
    pub fn with_target(mut self, ds: &Dataset, target: Target) -> Result<Self> {
        if ds.len() != self.n_rows() {
            return Err(Error::LengthMismatch {
                left: ds.len(),
                right: self.n_rows(),
            });
        }
        self.targets = Some(Array1::from(ds.target_values(target)?));
        self.target_name = target.name().to_string();
        Ok(self)
    }

    pub fn targets(&self) -> Result<&Array1<f64>> {
        self.targets
            .as_ref()
            .ok_or_else(|| Error::invalid("feature matrix has no targets"))
    }
}

pub fn encode_features(ds: &Dataset, include_salt: bool) -> Result<FeatureMatrix> {
    encode_features_with_labels(ds, include_salt, &CategoryLabels::default())
}

pub fn encode_features_with_labels(
    ds: &Dataset,
    include_salt: bool,
    labels: &CategoryLabels,
) -> Result<FeatureMatrix> {
    let schema = FeatureSchema::new(include_salt, labels);
    let mut rows = Array2::<f64>::zeros((ds.len(), schema.width()));
    let color_off = schema.color_offset();
    let horizon_off = schema.horizon_offset();
    for (i, s) in ds.samples.iter().enumerate() {
        let mut row = rows.row_mut(i);
        let mut c = 0;
        if include_salt {
            row[0] = s.salt_concentration.ok_or_else(|| Error::Row {
                row: i + 1,
                message: format!(
                    "sample {:?} lacks salt_concentration required by the encoding",
                    s.sample_id
                ),
            })?;
            c = 1;
        }
        for v in [
            s.formation_top_depth,
            s.formation_bottom_depth,
            s.porosity_initial,
            s.permeability_initial,
            s.sample_depth,
            s.density_initial,
            s.grain_size,
        ] {
            row[c] = v;
            c += 1;
        }
        let color = labels.color_slot(&s.color).ok_or_else(|| Error::Row {
            row: i + 1,
            message: format!("unknown color {:?}", s.color),
        })?;
        let horizon = labels.horizon_slot(&s.horizon).ok_or_else(|| Error::Row {
            row: i + 1,
            message: format!("unknown horizon {:?}", s.horizon),
        })?;
        row[color_off + color] = 1.0;
        row[horizon_off + horizon] = 1.0;
    }
    Ok(FeatureMatrix {
        schema,
        rows,
        targets: None,
        target_name: String::new(),
    })
}

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler<F> {
    pub means: Array1<F>,
    pub stds: Array1<F>,
}

impl<F: Real> Scaler<F> {
    /// Population mean and standard deviation per column; deviations at the
    /// rounding-error level become 1.
    pub fn fit(train_rows: ArrayView2<F>) -> Result<Self> {
        let n = train_rows.nrows();
        if n < 2 {
            return Err(Error::invalid(format!(
                "scaler needs at least 2 rows, got {n}"
            )));
        }
        let nf = F::from_count(n);
        let means = train_rows.sum_axis(Axis(0)).mapv(|s| s / nf);
        let mut stds = Array1::zeros(train_rows.ncols());
        for (j, col) in train_rows.axis_iter(Axis(1)).enumerate() {
            let m = means[j];
            let var = col.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / nf;
            let sd = var.sqrt();
            // Summation error alone can make a constant column look spread by
            // a few ulps; such columns are treated as constant.
            let magnitude = col.iter().fold(F::zero(), |a, &x| a.max(x.abs()));
            let floor = F::epsilon() * nf * magnitude;
            stds[j] = if sd > floor { sd } else { F::one() };
        }
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, rows: ArrayView2<F>) -> Result<Array2<F>> {
        if rows.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rows.ncols(),
            });
        }
        let mut out = rows.to_owned();
        for mut row in out.rows_mut() {
            for ((x, &m), &s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
                *x = (*x - m) / s;
            }
        }
        Ok(out)
    }

    /// Maps scaled values of a single column back to the original units.
    pub fn invert_column(&self, column: usize, values: &mut [F]) {
        let (m, s) = (self.means[column], self.stds[column]);
        for v in values {
            *v = *v * s + m;
        }
    }
}

pub fn fit_scaler<F: Real>(train_rows: ArrayView2<F>) -> Result<Scaler<F>> {
    Scaler::fit(train_rows)
}

pub fn apply_scaler<F: Real>(s: &Scaler<F>, rows: ArrayView2<F>) -> Result<Array2<F>> {
    s.apply(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const HEADER: &str = "sample_id,sample_depth_m,formation_top_depth_m,formation_bottom_depth_m,porosity_initial_pct,permeability_initial_md,density_initial_gcc,grain_size_mm,color,horizon";

    fn one_row(extra_header: &str, extra: &str, porosity: &str) -> String {
        format!(
            "{HEADER}{extra_header}\ns1,1700.5,1690,1720,{porosity},12.5,2.41,0.25,red,h2{extra}\n"
        )
    }

    #[test]
    fn parses_minimal_file() {
        let ds = parse_csv(one_row("", "", "5.0").as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        let s = &ds.samples[0];
        assert_eq!(s.sample_id, "s1");
        assert_eq!(s.color, "red");
        assert_eq!(s.salt_concentration, None);
        assert_eq!(s.porosity_after, None);
    }

    #[test]
    fn rejects_porosity_out_of_range_with_row() {
        let err = parse_csv(one_row("", "", "120").as_bytes()).unwrap_err();
        match err {
            Error::Row { row, message } => {
                assert_eq!(row, 1);
                assert!(message.contains("porosity_initial"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn optional_columns_parse_when_present() {
        let text = one_row(
            ",salt_concentration_gg,porosity_after_pct,permeability_after_md",
            ",0.1,16.0,300",
            "5",
        );
        let ds = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.samples[0].salt_concentration, Some(0.1));
        assert_eq!(ds.samples[0].permeability_after, Some(300.0));
    }

    #[test]
    fn partially_populated_optional_column_is_an_error() {
        let text = format!(
            "{HEADER},salt_concentration_gg\n\
             a,1700,1690,1720,5,12,2.4,0.25,red,h1,0.1\n\
             b,1701,1690,1720,5,12,2.4,0.25,red,h1,\n"
        );
        let err = parse_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_unknown_column_and_labels() {
        let text = format!("{HEADER},mystery\ns1,1700,1690,1720,5,12,2.4,0.25,red,h1,3\n");
        assert!(matches!(parse_csv(text.as_bytes()), Err(Error::Csv(_))));

        let text = format!("{HEADER}\ns1,1700,1690,1720,5,12,2.4,0.25,purple,h1\n");
        let err = parse_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("purple"));

        let text = format!("{HEADER}\ns1,1700,1690,1720,5,abc,2.4,0.25,red,h1\n");
        let err = parse_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
    }

    #[test]
    fn lithology_term_column_replaces_grain_size() {
        let header = HEADER.replace("grain_size_mm", "lithology_term");
        let text = format!("{header}\ns1,1700,1690,1720,5,12,2.4,Coarse Sand,red,h1\n");
        let ds = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.samples[0].grain_size, 0.5);

        let both = format!("{HEADER},lithology_term\ns1,1700,1690,1720,5,12,2.4,0.5,red,h1,clay\n");
        assert!(parse_csv(both.as_bytes()).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!(
            "{HEADER}\ns1,1700,1690,1720,5,12,2.4,0.25,red,h1\ns1,1701,1690,1720,5,12,2.4,0.25,red,h1\n"
        );
        assert!(parse_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn lexicon_lookup() {
        assert_eq!(grain_size_from_lithology("gravel").unwrap(), 1.0);
        assert_eq!(grain_size_from_lithology("Clay").unwrap(), 0.005);
        assert_eq!(grain_size_from_lithology("FINE  silt").unwrap(), 0.01);
        let err = grain_size_from_lithology("granite").unwrap_err();
        assert!(err.to_string().contains("coarse sand"));
    }

    #[test]
    fn salt_from_masses() {
        assert_eq!(salt_concentration_from_masses(200.0, 200.0).unwrap(), 0.0);
        assert!((salt_concentration_from_masses(200.0, 190.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(salt_concentration_from_masses(200.0, 210.0).is_err());
        assert!(salt_concentration_from_masses(0.0, 0.0).is_err());
        assert!(salt_concentration_from_masses(10.0, -1.0).is_err());
    }

    fn sample(color: &str, salt: Option<f64>) -> CoreSample {
        CoreSample {
            sample_id: format!("s-{color}"),
            sample_depth: 1700.0,
            formation_top_depth: 1690.0,
            formation_bottom_depth: 1720.0,
            porosity_initial: 5.0,
            permeability_initial: 10.0,
            density_initial: 2.4,
            grain_size: 0.25,
            color: color.into(),
            horizon: "h3".into(),
            salt_concentration: salt,
            porosity_after: None,
            permeability_after: None,
        }
    }

    #[test]
    fn encoding_widths_and_one_hot() {
        let ds = Dataset::new(vec![sample("red", Some(0.12))], "test").unwrap();
        let fm = encode_features(&ds, false).unwrap();
        assert_eq!(fm.rows.dim(), (1, 16));
        let fm = encode_features(&ds, true).unwrap();
        assert_eq!(fm.rows.dim(), (1, 17));
        assert_eq!(fm.rows[[0, 0]], 0.12);
        let colors = fm.rows.row(0).slice(ndarray::s![8..14]).to_vec();
        assert_eq!(colors, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let horizons = fm.rows.row(0).slice(ndarray::s![14..17]).to_vec();
        assert_eq!(horizons, vec![0.0, 0.0, 1.0]);
        assert_eq!(fm.schema.column_names[3], "porosity_initial_pct");
    }

    #[test]
    fn encoding_with_salt_requires_values() {
        let ds = Dataset::new(vec![sample("red", None)], "test").unwrap();
        assert!(encode_features(&ds, true).is_err());
    }

    #[test]
    fn scaler_statistics() {
        let s = Scaler::fit(array![[0.0, 5.0], [2.0, 5.0]].view()).unwrap();
        assert_eq!(s.means.to_vec(), vec![1.0, 5.0]);
        assert_eq!(s.stds.to_vec(), vec![1.0, 1.0]);
        let s3 = Scaler::fit(array![[5.0], [5.0], [5.0]].view()).unwrap();
        assert_eq!(s3.stds[0], 1.0);
        assert!(Scaler::fit(array![[1.0]].view()).is_err());

        let scaled = s.apply(array![[0.0, 5.0], [2.0, 5.0]].view()).unwrap();
        assert_eq!(scaled, array![[-1.0, 0.0], [1.0, 0.0]]);
        let centered = s.apply(s.means.view().insert_axis(Axis(0))).unwrap();
        assert!(centered.iter().all(|&v| v == 0.0));
        assert!(matches!(
            s.apply(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn scaler_columns_independent() {
        let s = Scaler::fit(array![[0.0, 10.0], [4.0, 10.0], [8.0, 40.0]].view()).unwrap();
        assert_eq!(s.means[0], 4.0);
        assert_eq!(s.means[1], 20.0);
        assert!((s.stds[0] - (32.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
