//! Surgical Outcome Risk Tool (SORT) case study.
//!
//! Patients are encoded into the ten dummy/numeric features of the SORT
//! logistic model: ASA-PS 2/3/4 dummies against ASA-PS 1, an emergency
//! flag, severity dummies against Minor, a malignancy score, and two
//! age-group dummies against the base group. ASA-PS 5 has no coefficient of
//! its own and is folded into the ASA-PS 4 dummy unless rejection is asked for.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::classifiers::{self, GlmParams, ModelKind, ModelSpec, INTERCEPT_NAME};
use crate::data::{self, format_float, Dataset, Standardizer};
use crate::error::Result;
use crate::evaluation::pr_auc;
use crate::resampling::{self, Method, ResamplePlan};
use crate::seed;

#[derive(Debug, Error)]
pub enum SortError {
    #[error("InvalidPatient: row {row}: {message}")]
    InvalidPatient { row: usize, message: String },
    #[error("Asa5NotEncodable: ASA-PS 5 has no coefficient and clamping is disabled")]
    Asa5NotEncodable,
    #[error("InvalidCoefficients: {0}")]
    InvalidCoefficients(String),
    #[error("MissingColumn: patients file has no '{0}' column")]
    MissingColumn(String),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Intermediate,
    Major,
    #[serde(rename = "Xmajor/Complex")]
    Xmajor,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Minor,
        Severity::Intermediate,
        Severity::Major,
        Severity::Xmajor,
    ];
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Minor => "Minor",
            Severity::Intermediate => "Intermediate",
            Severity::Major => "Major",
            Severity::Xmajor => "Xmajor/Complex",
        })
    }
}

impl FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minor" => Ok(Severity::Minor),
            "intermediate" => Ok(Severity::Intermediate),
            "major" => Ok(Severity::Major),
            "xmajor/complex" | "xmajor" | "complex" => Ok(Severity::Xmajor),
            _ => Err(format!("unknown severity '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Base,
    Grp1,
    Grp2,
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgeGroup::Base => "base",
            AgeGroup::Grp1 => "grp1",
            AgeGroup::Grp2 => "grp2",
        })
    }
}

impl FromStr for AgeGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" | "0" => Ok(AgeGroup::Base),
            "grp1" | "age_grp_1" | "1" => Ok(AgeGroup::Grp1),
            "grp2" | "age_grp_2" | "2" => Ok(AgeGroup::Grp2),
            _ => Err(format!("unknown age group '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortPatient {
    pub asa_ps: u8,
    pub emergency: bool,
    pub severity: Severity,
    pub malignancy: f64,
    pub age_group: AgeGroup,
}

impl SortPatient {
    /// The reference patient: ASA-PS 1, elective, minor, no malignancy, base age.
    pub fn reference() -> Self {
        Self {
            asa_ps: 1,
            emergency: false,
            severity: Severity::Minor,
            malignancy: 0.0,
            age_group: AgeGroup::Base,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=5).contains(&self.asa_ps) {
            return Err(format!("asa_ps {} outside 1..=5", self.asa_ps));
        }
        if !(self.malignancy.is_finite() && self.malignancy >= 0.0) {
            return Err(format!("malignancy {} must be a nonnegative number", self.malignancy));
        }
        Ok(())
    }
}

/// Charlson Comorbidity Index to ASA-PS: 0..=3 map to 1..=4, 4 and above to 5.
pub fn cci_to_asa(cci: u32) -> u8 {
    (cci.min(4) + 1) as u8
}

/// Names of the encoded features, in model order.
pub const FEATURE_NAMES: [&str; 10] = [
    "ASAPS2",
    "ASAPS3",
    "ASAPS4",
    "Emergency",
    "Severity=Intermediate",
    "Severity=Major",
    "Severity=Xmajor/Complex",
    "Malignancy",
    "age_grp_1",
    "age_grp_2",
];

const DEFAULT_VALUES: [f64; 11] = [
    -3.892, 1.902, 1.932, 3.637, 1.859, 1.526, 0.841, 0.899, 0.275, 0.597, 0.764,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Asa5Handling {
    /// Encode ASA-PS 5 with the ASA-PS 4 dummy.
    #[default]
    Clamp,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MalignancyMode {
    /// Use the score as given.
    #[default]
    Graded,
    /// Any positive score becomes 1.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingOptions {
    pub asa5: Asa5Handling,
    pub malignancy: MalignancyMode,
}

/// Intercept followed by one coefficient per entry of [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct SortCoefficients {
    values: [f64; 11],
}

impl Default for SortCoefficients {
    fn default() -> Self {
        Self {
            values: DEFAULT_VALUES,
        }
    }
}

impl SortCoefficients {
    pub fn names() -> impl Iterator<Item = &'static str> {
        std::iter::once(INTERCEPT_NAME).chain(FEATURE_NAMES)
    }

    pub fn intercept(&self) -> f64 {
        self.values[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.values[1..]
    }

    pub fn values(&self) -> &[f64; 11] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::names().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn from_values(values: [f64; 11]) -> std::result::Result<Self, SortError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let name = Self::names().nth(i).unwrap_or_default();
            return Err(SortError::InvalidCoefficients(format!("{name} is not finite")));
        }
        Ok(Self { values })
    }

    /// Requires an object with exactly the 11 model names.
    pub fn from_json(value: &Value) -> std::result::Result<Self, SortError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SortError::InvalidCoefficients("expected a JSON object".into()))?;
        if let Some(extra) = obj.keys().find(|k| !Self::names().any(|n| n == *k)) {
            return Err(SortError::InvalidCoefficients(format!("unknown name '{extra}'")));
        }
        let mut values = [0.0; 11];
        for (i, name) in Self::names().enumerate() {
            values[i] = obj
                .get(name)
                .and_then(Value::as_f64)
                .ok_or_else(|| SortError::InvalidCoefficients(format!("missing or non-numeric '{name}'")))?;
        }
        Self::from_values(values)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (name, v) in Self::names().zip(self.values) {
            m.insert(name.to_string(), Value::from(v));
        }
        Value::Object(m)
    }

    pub fn linear_predictor(&self, features: &[f64]) -> f64 {
        self.intercept()
            + self
                .slopes()
                .iter()
                .zip(features)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

pub fn encode_sort_features(
    p: &SortPatient,
    opts: EncodingOptions,
) -> std::result::Result<[f64; 10], SortError> {
    let mut x = [0.0; 10];
    match p.asa_ps {
        2 => x[0] = 1.0,
        3 => x[1] = 1.0,
        4 => x[2] = 1.0,
        5 if opts.asa5 == Asa5Handling::Clamp => x[2] = 1.0,
        5 => return Err(SortError::Asa5NotEncodable),
        _ => {}
    }
    x[3] = f64::from(u8::from(p.emergency));
    match p.severity {
        Severity::Minor => {}
        Severity::Intermediate => x[4] = 1.0,
        Severity::Major => x[5] = 1.0,
        Severity::Xmajor => x[6] = 1.0,
    }
    x[7] = match opts.malignancy {
        MalignancyMode::Graded => p.malignancy,
        MalignancyMode::Binary => f64::from(u8::from(p.malignancy > 0.0)),
    };
    match p.age_group {
        AgeGroup::Base => {}
        AgeGroup::Grp1 => x[8] = 1.0,
        AgeGroup::Grp2 => x[9] = 1.0,
    }
    Ok(x)
}

/// Mortality probability with default encoding options.
pub fn sort_score(p: &SortPatient, c: &SortCoefficients) -> f64 {
    sort_score_with(p, c, EncodingOptions::default()).expect("default options encode every patient")
}

pub fn sort_score_with(
    p: &SortPatient,
    c: &SortCoefficients,
    opts: EncodingOptions,
) -> std::result::Result<f64, SortError> {
    let x = encode_sort_features(p, opts)?;
    Ok(classifiers::sigmoid(c.linear_predictor(&x)))
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "emergency" => Some(true),
        "0" | "false" | "no" | "elective" => Some(false),
        _ => None,
    }
}

/// A patients file: the parsed patients, the optional outcome column, and
/// the raw records so scores can be appended to the original columns.
#[derive(Debug, Clone)]
pub struct PatientTable {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
    pub patients: Vec<SortPatient>,
    pub outcomes: Option<Vec<u8>>,
}

/// Reads columns `asa_ps` (or `cci`), `emergency`, `severity`, `malignancy`
/// and `age_group`. If `outcome_column` is given it must hold 0/1 values.
pub fn read_patients<R: Read>(
    reader: R,
    outcome_column: Option<&str>,
) -> std::result::Result<PatientTable, SortError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let need = |name: &str| col(name).ok_or_else(|| SortError::MissingColumn(name.to_string()));
    let asa_col = col("asa_ps");
    let cci_col = col("cci");
    if asa_col.is_none() && cci_col.is_none() {
        return Err(SortError::MissingColumn("asa_ps".into()));
    }
    let (em, sev, mal, age) = (need("emergency")?, need("severity")?, need("malignancy")?, need("age_group")?);
    let out_col = outcome_column.map(need).transpose()?;

    let mut records = Vec::new();
    let mut patients = Vec::new();
    let mut outcomes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |message: String| SortError::InvalidPatient { row, message };
        let field = |c: usize| rec.get(c).unwrap_or("");
        let asa_ps = match (asa_col, cci_col) {
            (Some(c), _) => field(c)
                .parse::<u8>()
                .map_err(|_| bad(format!("asa_ps '{}' is not an integer", field(c))))?,
            (None, Some(c)) => cci_to_asa(
                field(c)
                    .parse::<u32>()
                    .map_err(|_| bad(format!("cci '{}' is not a nonnegative integer", field(c))))?,
            ),
            (None, None) => unreachable!(),
        };
        let patient = SortPatient {
            asa_ps,
            emergency: parse_flag(field(em))
                .ok_or_else(|| bad(format!("emergency '{}' is not a flag", field(em))))?,
            severity: field(sev).parse().map_err(bad)?,
            malignancy: field(mal)
                .parse()
                .map_err(|_| bad(format!("malignancy '{}' is not numeric", field(mal))))?,
            age_group: field(age).parse().map_err(bad)?,
        };
        patient.validate().map_err(bad)?;
        if let Some(c) = out_col {
            outcomes.push(match field(c) {
                "1" => 1,
                "0" => 0,
                v => return Err(bad(format!("outcome '{v}' is not 0 or 1"))),
            });
        }
        records.push(rec.iter().map(str::to_string).collect());
        patients.push(patient);
    }
    Ok(PatientTable {
        headers,
        records,
        patients,
        outcomes: out_col.map(|_| outcomes),
    })
}

/// Writes the table's original columns plus a `probability` column.
pub fn write_scored<W: Write>(
    writer: W,
    table: &PatientTable,
    coefficients: &SortCoefficients,
    opts: EncodingOptions,
) -> std::result::Result<(), SortError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = table.headers.clone();
    header.push("probability".into());
    w.write_record(&header)?;
    for (i, (rec, p)) in table.records.iter().zip(&table.patients).enumerate() {
        let prob = sort_score_with(p, coefficients, opts).map_err(|e| SortError::InvalidPatient {
            row: i + 1,
            message: e.to_string(),
        })?;
        let mut out = rec.clone();
        out.push(format_float(prob));
        w.write_record(&out)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Encoded dataset with the ten model features and the given outcomes.
pub fn patients_to_dataset(
    patients: &[SortPatient],
    outcomes: &[u8],
    opts: EncodingOptions,
) -> Result<Dataset> {
    let mut features = Vec::with_capacity(patients.len() * 10);
    for p in patients {
        features.extend(encode_sort_features(p, opts)?);
    }
    Ok(Dataset::new(
        features,
        10,
        outcomes.to_vec(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        "sort",
    )?
    .with_label_name("mortality"))
}

/// Covariate mix of [`generate_cohort`]: mostly low-risk elective patients,
/// which with the default coefficients gives roughly 13% mortality.
const COHORT_ASA: [f64; 4] = [0.70, 0.20, 0.08, 0.02];
const COHORT_EMERGENCY: f64 = 0.03;
const COHORT_SEVERITY: [f64; 4] = [0.60, 0.20, 0.14, 0.06];
const COHORT_MALIGNANCY: [f64; 3] = [0.90, 0.07, 0.03];
const COHORT_AGE: [f64; 3] = [0.60, 0.28, 0.12];

/// Cohort with outcomes drawn from the logistic model with `coefficients`.
pub fn generate_cohort(
    n: usize,
    coefficients: &SortCoefficients,
    seed: u64,
) -> (Vec<SortPatient>, Vec<u8>) {
    let weighted = |w: &[f64]| WeightedIndex::new(w).expect("constant weights are valid");
    let (asa, severity) = (weighted(&COHORT_ASA), weighted(&COHORT_SEVERITY));
    let (malignancy, age) = (weighted(&COHORT_MALIGNANCY), weighted(&COHORT_AGE));
    let ages = [AgeGroup::Base, AgeGroup::Grp1, AgeGroup::Grp2];
    let mut rng = seed::rng(seed);
    let mut patients = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let p = SortPatient {
            asa_ps: asa.sample(&mut rng) as u8 + 1,
            emergency: rng.random_bool(COHORT_EMERGENCY),
            severity: Severity::ALL[severity.sample(&mut rng)],
            malignancy: malignancy.sample(&mut rng) as f64,
            age_group: ages[age.sample(&mut rng)],
        };
        let prob = sort_score(&p, coefficients);
        outcomes.push(u8::from(rng.random::<f64>() < prob));
        patients.push(p);
    }
    (patients, outcomes)
}

/// One re-sampling configuration in the case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub model: String,
    pub method: String,
    pub size_ratio: Option<f64>,
    pub pr_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyResult {
    pub rows: Vec<CaseStudyRow>,
    pub train_size: usize,
    pub test_size: usize,
}

impl CaseStudyResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,method,size_ratio,pr_auc\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{}\n",
                r.model,
                r.method,
                r.size_ratio.map(format_float).unwrap_or_default(),
                format_float(r.pr_auc)
            );
        }
        out
    }

    pub fn get(&self, method: &str, size_ratio: Option<f64>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.size_ratio == size_ratio)
            .map(|r| r.pr_auc)
    }
}

pub const CASE_STUDY_TRAIN_FRACTION: f64 = 2.0 / 3.0;

/// 2/3 to 1/3 stratified split; the fixed-coefficient scorer, the
/// unresampled benchmark and each plan are scored by test PR-AUC.
///
/// Plans re-sample in standardized feature space; the logistic model is then
/// fitted on raw-scale encoded features so its coefficients stay comparable
/// with the fixed scorer's.
pub fn run_case_study(
    data: &Dataset,
    plans: &[ResamplePlan],
    coefficients: &SortCoefficients,
    glm: GlmParams,
    seed: u64,
) -> Result<CaseStudyResult> {
    if data.n_features() != FEATURE_NAMES.len() {
        return Err(data::DataError::DimensionMismatch {
            expected: FEATURE_NAMES.len(),
            found: data.n_features(),
        }
        .into());
    }
    let split = data::stratified_split(
        data,
        CASE_STUDY_TRAIN_FRACTION,
        seed::derive(seed, &["split".into()]),
    )?;
    let (train, test) = (&split.train, &split.test);
    let spec = ModelSpec {
        glm,
        ..ModelSpec::new(ModelKind::Glm)
    };
    let score_glm = |fit_on: &Dataset| -> Result<f64> {
        let model = classifiers::fit(fit_on, &spec)?;
        let scores = classifiers::predict_scores(&model, test)?;
        Ok(pr_auc(test.labels(), &scores)?)
    };

    let mut rows = Vec::new();
    let fixed: Vec<f64> = test
        .rows()
        .map(|r| classifiers::sigmoid(coefficients.linear_predictor(r)))
        .collect();
    rows.push(CaseStudyRow {
        model: "fixed".into(),
        method: "UK SORT".into(),
        size_ratio: None,
        pr_auc: pr_auc(test.labels(), &fixed)?,
    });
    rows.push(CaseStudyRow {
        model: "glm".into(),
        method: "Benchmark".into(),
        size_ratio: None,
        pr_auc: score_glm(train)?,
    });

    let standardizer = Standardizer::fit(train);
    let z_train = standardizer.transform(train)?;
    let mut cache: HashMap<String, usize> = HashMap::new();
    for plan in plans {
        let label = plan.method.label(plan.diversity);
        let size_ratio = plan.method.is_hybrid().then_some(plan.hybrid_size_ratio);
        let key = format!("{label}|{size_ratio:?}");
        let occurrence = cache.entry(key.clone()).or_insert(0);
        *occurrence += 1;
        let plan = ResamplePlan {
            seed: seed::derive(
                seed,
                &[
                    "resample".into(),
                    plan.method.as_str().into(),
                    size_ratio.map_or(0, f64::to_bits).into(),
                    (*occurrence as u64).into(),
                    plan.seed.into(),
                ],
            ),
            ..plan.clone()
        };
        let pr = if plan.method == Method::None {
            score_glm(train)?
        } else {
            let outcome = resampling::resample(&z_train, &plan)
                .map_err(|e| crate::Error::from(e).context(format!("case study plan {label}")))?;
            score_glm(&outcome.restore_scale(train, &standardizer)?)?
        };
        rows.push(CaseStudyRow {
            model: "glm".into(),
            method: label,
            size_ratio,
            pr_auc: pr,
        });
    }
    Ok(CaseStudyResult {
        rows,
        train_size: train.len(),
        test_size: test.len(),
    })
}
