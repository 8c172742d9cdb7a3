//! Model-spec and simulation-config files (TOML), CSV datasets, JSON reports
//! and profile-curve CSVs, and the three command drivers.
//!
//! In data files the response cell is left empty on rows with selection 0.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Model};
use crate::error::{Error, Result};
use crate::estimator::{
    profile_maximize, profile_points, AlphaInterval, BoundaryDiagnostic, GridConfig, PointStatus, ProfileCurve,
    ProfileOptions,
};
use crate::family::ResponseFamily;
use crate::mechanism::MechanismKind;
use crate::normalizer::Truncation;
use crate::simulate::{simulate, CovariateLaw, SimConfig, Simulated};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const INTERCEPT: &str = "(Intercept)";

fn yes() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

/// `grid = "auto"` or `grid = [α₁, α₂, …]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Keyword(String),
    List(Vec<f64>),
}

impl GridSpec {
    pub fn to_config(&self) -> Result<GridConfig> {
        match self {
            GridSpec::Keyword(k) if k.trim().eq_ignore_ascii_case("auto") => Ok(GridConfig::Auto),
            GridSpec::Keyword(k) => Err(Error::Config(format!("unknown grid keyword '{k}'"))),
            GridSpec::List(v) => Ok(GridConfig::Explicit(v.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    pub link: Option<String>,
    pub mechanism: String,
    pub response_col: String,
    pub selection_col: String,
    pub x_cols: Vec<String>,
    pub w_cols: Vec<String>,
    #[serde(default = "yes")]
    pub intercept_x: bool,
    #[serde(default = "yes")]
    pub intercept_w: bool,
    pub truncation_k: Option<u64>,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    pub kappa: Option<f64>,
    pub grid: Option<GridSpec>,
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ModelSpec = parse_toml(text, "model spec")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!("ci_level must be in (0,1), got {}", self.ci_level)));
        }
        for col in self.x_cols.iter().chain(&self.w_cols) {
            if *col == self.response_col || *col == self.selection_col {
                return Err(Error::Config(format!("covariate '{col}' is also the response or selection column")));
            }
        }
        if self.response_col == self.selection_col {
            return Err(Error::Config("response and selection columns must differ".into()));
        }
        if self.x_cols.is_empty() && !self.intercept_x || self.w_cols.is_empty() && !self.intercept_w {
            return Err(Error::Config("each design needs at least one column".into()));
        }
        if let Some(g) = &self.grid {
            g.to_config()?;
        }
        if self.truncation_k == Some(0) {
            return Err(Error::Config("truncation_k must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        let family = ResponseFamily::from_keys(&self.family, self.link.as_deref(), self.kappa)?;
        let mech = MechanismKind::from_key(&self.mechanism)?;
        let truncation = self.truncation_k.map_or(Truncation::Auto, Truncation::Fixed);
        Ok(Model::new(family, mech)?.with_truncation(truncation))
    }

    pub fn grid_config(&self) -> Result<GridConfig> {
        self.grid.as_ref().map_or(Ok(GridConfig::Auto), GridSpec::to_config)
    }

    fn names(cols: &[String], intercept: bool) -> Vec<String> {
        let mut v = Vec::with_capacity(cols.len() + 1);
        if intercept {
            v.push(INTERCEPT.to_string());
        }
        v.extend(cols.iter().cloned());
        v
    }
}

/// A loaded dataset with the warnings raised in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub data: Dataset,
    pub warnings: Vec<String>,
}

/// Parses a CSV dataset laid out as described by `spec`.
pub fn read_dataset<R: Read>(reader: R, spec: &ModelSpec, lenient: bool) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(0, name, "column not found in header"))
    };
    let iy = find(&spec.response_col)?;
    let id = find(&spec.selection_col)?;
    let ix: Vec<usize> = spec.x_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let iw: Vec<usize> = spec.w_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut d = Vec::new();
    let mut y = Vec::new();
    let mut xv: Vec<Vec<f64>> = Vec::new();
    let mut wv: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let number = |j: usize, name: &str| -> Result<f64> {
            let s = cell(j);
            let v: f64 = s.parse().map_err(|_| Error::schema(row, name, format!("'{s}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::schema(row, name, "value is not finite"))
            }
        };
        let di = match cell(id) {
            "1" => true,
            "0" => false,
            s => return Err(Error::schema(row, &spec.selection_col, format!("'{s}' is not 0 or 1"))),
        };
        let yi = if cell(iy).is_empty() {
            None
        } else {
            Some(number(iy, &spec.response_col)?)
        };
        let yi = match (di, yi) {
            (true, None) => {
                return Err(Error::schema(row, &spec.response_col, "response missing on a selected row"));
            }
            (false, Some(_)) if !lenient => {
                return Err(Error::schema(row, &spec.response_col, "response present on a non-selected row"));
            }
            (false, Some(_)) => {
                warnings.push(format!("row {row}: response present on a non-selected row; ignored"));
                None
            }
            (_, v) => v,
        };
        let mut xr = Vec::with_capacity(ix.len() + 1);
        if spec.intercept_x {
            xr.push(1.0);
        }
        for (k, &j) in ix.iter().enumerate() {
            xr.push(number(j, &spec.x_cols[k])?);
        }
        let mut wr = Vec::with_capacity(iw.len() + 1);
        if spec.intercept_w {
            wr.push(1.0);
        }
        for (k, &j) in iw.iter().enumerate() {
            wr.push(number(j, &spec.w_cols[k])?);
        }
        d.push(di);
        y.push(yi);
        xv.push(xr);
        wv.push(wr);
    }
    let x_names = ModelSpec::names(&spec.x_cols, spec.intercept_x);
    let w_names = ModelSpec::names(&spec.w_cols, spec.intercept_w);
    let to_matrix = |rows: &[Vec<f64>], k: usize| DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let x = to_matrix(&xv, x_names.len());
    let w = to_matrix(&wv, w_names.len());
    let data = Dataset::new(d, y, x, w, x_names, w_names)?;
    let family = spec.model()?.family;
    for (i, v) in data.y.iter().enumerate() {
        if let Some(v) = v {
            family
                .check_support(*v)
                .map_err(|e| Error::schema(i + 1, &spec.response_col, e.to_string()))?;
        }
    }
    Ok(Loaded { data, warnings })
}

pub fn load_dataset(path: &Path, spec: &ModelSpec, lenient: bool) -> Result<Loaded> {
    read_dataset(fs::File::open(path)?, spec, lenient)
}

/// Writes `data` with the intercept columns omitted. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset, response: &str, selection: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let xcols: Vec<usize> = (0..data.p()).filter(|&j| data.x_names[j] != INTERCEPT).collect();
    let wcols: Vec<usize> = (0..data.q()).filter(|&j| data.w_names[j] != INTERCEPT).collect();
    let mut header = vec![response.to_string(), selection.to_string()];
    header.extend(xcols.iter().map(|&j| data.x_names[j].clone()));
    header.extend(wcols.iter().map(|&j| data.w_names[j].clone()));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![
            data.y[i].map_or(String::new(), |v| v.to_string()),
            if data.d[i] { "1" } else { "0" }.to_string(),
        ];
        rec.extend(xcols.iter().map(|&j| data.x[(i, j)].to_string()));
        rec.extend(wcols.iter().map(|&j| data.w[(i, j)].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Spec matching a file written by [`write_dataset`] for simulated data.
pub fn spec_for(data: &Dataset, family: &str, link: Option<&str>, mechanism: &str, kappa: Option<f64>) -> ModelSpec {
    let strip = |names: &[String]| -> Vec<String> { names.iter().filter(|n| *n != INTERCEPT).cloned().collect() };
    ModelSpec {
        family: family.into(),
        link: link.map(Into::into),
        mechanism: mechanism.into(),
        response_col: "y".into(),
        selection_col: "d".into(),
        x_cols: strip(&data.x_names),
        w_cols: strip(&data.w_names),
        intercept_x: data.x_names.first().is_some_and(|n| n == INTERCEPT),
        intercept_w: data.w_names.first().is_some_and(|n| n == INTERCEPT),
        truncation_k: None,
        ci_level: 0.95,
        kappa,
        grid: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub n: usize,
    pub seed: u64,
    pub family: String,
    pub link: Option<String>,
    pub mechanism: String,
    pub kappa: Option<f64>,
    /// Intercept first; the remaining entries multiply generated columns x1, x2, ….
    pub beta: Vec<f64>,
    /// Intercept first; the remaining entries multiply generated columns w1, w2, ….
    pub gamma: Vec<f64>,
    pub alpha: f64,
    #[serde(default = "one")]
    pub psi: f64,
    #[serde(default = "name_y")]
    pub response_name: String,
    #[serde(default = "name_d")]
    pub selection_name: String,
}

fn one() -> f64 {
    1.0
}
fn name_y() -> String {
    "y".into()
}
fn name_d() -> String {
    "d".into()
}

impl SimFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text, "simulation config")
    }

    pub fn to_config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            n: self.n,
            family: ResponseFamily::from_keys(&self.family, self.link.as_deref(), self.kappa)?,
            mechanism: MechanismKind::from_key(&self.mechanism)?,
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            alpha: self.alpha,
            psi: self.psi,
            covariates: CovariateLaw::StandardNormalColumns,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_sha256: String,
    pub data_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub std_err: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub provenance: Provenance,
    pub family: String,
    pub link: String,
    pub mechanism: String,
    pub n: usize,
    pub n_selected: usize,
    pub response: Vec<CoefRow>,
    pub selection: Vec<CoefRow>,
    pub dispersion: Option<CoefRow>,
    pub alpha_hat: f64,
    pub loglik_max: f64,
    pub alpha_ci: AlphaInterval,
    pub boundary: BoundaryDiagnostic,
    pub warnings: Vec<String>,
    pub profile: ProfileCurve,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the profile curve as `alpha,rel_loglik,loglik,status`; failed points have empty values.
pub fn write_profile<W: Write>(writer: W, curve: &ProfileCurve) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["alpha", "rel_loglik", "loglik", "status"])?;
    for i in 0..curve.alphas.len() {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let status = match curve.status[i] {
            PointStatus::Ok => "ok",
            PointStatus::Failed => "failed",
        };
        wtr.write_record([
            curve.alphas[i].to_string(),
            opt(curve.rel_loglik[i]),
            opt(curve.loglik[i]),
            status.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    f(&mut file)
}

/// Reads spec and data, fits, and assembles the report.
pub fn fit_files(data_path: &Path, spec_path: &Path, lenient: bool) -> Result<FitReportFile> {
    let spec_text = fs::read(spec_path)?;
    let data_bytes = fs::read(data_path)?;
    let spec = ModelSpec::from_toml(&String::from_utf8_lossy(&spec_text))?;
    let loaded = read_dataset(data_bytes.as_slice(), &spec, lenient)?;
    let model = spec.model()?;
    let options = ProfileOptions { grid: spec.grid_config()?, level: spec.ci_level, ..Default::default() };
    let rep = profile_maximize(&loaded.data, &model, &options)?;
    let data = &loaded.data;
    let (p, q) = (data.p(), data.q());
    let row = |k: usize, name: &str, est: f64| CoefRow {
        name: name.to_string(),
        estimate: est,
        std_err: rep.std_err.as_ref().map(|s| s[k]),
        ratio: rep.ratio.as_ref().map(|r| r[k]),
    };
    let response = (0..p).map(|j| row(j, &data.x_names[j], rep.params.beta[j])).collect();
    let selection = (0..q).map(|j| row(p + j, &data.w_names[j], rep.params.gamma[j])).collect();
    let dispersion = rep.params.psi.map(|v| row(p + q, "psi", v));
    let mut warnings = loaded.warnings;
    warnings.extend(rep.warnings);
    Ok(FitReportFile {
        provenance: Provenance {
            spec_sha256: sha256_hex(&spec_text),
            data_sha256: sha256_hex(&data_bytes),
            seed: None,
            version: VERSION.to_string(),
        },
        family: model.family.key().to_string(),
        link: model.family.link().key().to_string(),
        mechanism: model.mechanism.key().to_string(),
        n: data.n(),
        n_selected: data.n_selected(),
        response,
        selection,
        dispersion,
        alpha_hat: rep.alpha_hat,
        loglik_max: rep.loglik_max,
        alpha_ci: rep.alpha_ci,
        boundary: rep.boundary,
        warnings,
        profile: rep.profile,
    })
}

/// Default location of the profile sidecar next to a report.
pub fn sidecar_path(report: &Path) -> PathBuf {
    report.with_extension("profile.csv")
}

/// `fit`: writes the JSON report (to `out`, or returns it only) and the profile sidecar.
pub fn cmd_fit(
    data_path: &Path,
    spec_path: &Path,
    out: Option<&Path>,
    profile_out: Option<&Path>,
    lenient: bool,
) -> Result<FitReportFile> {
    let report = fit_files(data_path, spec_path, lenient)?;
    if let Some(out) = out {
        write_file(out, |f| Ok(serde_json::to_writer_pretty(f, &report)?))?;
    }
    let sidecar = profile_out.map(Path::to_path_buf).or_else(|| out.map(sidecar_path));
    if let Some(path) = sidecar {
        write_file(&path, |f| write_profile(f, &report.profile))?;
    }
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<FitReportFile> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// `simulate`: writes the dataset described by a simulation config.
pub fn cmd_simulate(config_path: &Path, out: &Path) -> Result<Simulated> {
    let cfg = SimFile::from_toml(&fs::read_to_string(config_path)?)?;
    let sim = simulate(&cfg.to_config()?)?;
    write_file(out, |f| write_dataset(f, &sim.data, &cfg.response_name, &cfg.selection_name))?;
    Ok(sim)
}

/// `--alphas auto` or a comma-separated list.
pub fn parse_alphas(text: &str) -> Result<GridConfig> {
    if text.trim().eq_ignore_ascii_case("auto") {
        return Ok(GridConfig::Auto);
    }
    let v = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{s}' is not a number in the α list")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridConfig::Explicit(v))
}

/// `profile`: writes `(α, rel log L_p)` for the requested α values.
pub fn cmd_profile(data_path: &Path, spec_path: &Path, alphas: &GridConfig, out: &Path) -> Result<ProfileCurve> {
    let spec = ModelSpec::from_toml(&fs::read_to_string(spec_path)?)?;
    let loaded = load_dataset(data_path, &spec, false)?;
    let model = spec.model()?;
    let curve = match alphas {
        GridConfig::Auto => {
            let options = ProfileOptions { grid: GridConfig::Auto, level: spec.ci_level, ..Default::default() };
            profile_maximize(&loaded.data, &model, &options)?.profile
        }
        GridConfig::Explicit(v) => profile_points(&loaded.data, &model, v)?,
    };
    write_file(out, |f| write_profile(f, &curve))?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
family = "poisson"
mechanism = "probit-std"
response_col = "y"
selection_col = "d"
x_cols = ["x1"]
w_cols = ["w1"]
"#;

    #[test]
    fn toy_file_with_censored_row() {
        let spec = ModelSpec::from_toml(SPEC).unwrap();
        let csv = "y,d,x1,w1\n2,1,0.5,1\n,0,0.1,-1\n0,1,-0.2,0.3\n";
        let l = read_dataset(csv.as_bytes(), &spec, false).unwrap();
        assert_eq!(l.data.n(), 3);
        assert_eq!(l.data.n_selected(), 2);
        assert_eq!(l.data.x[(1, 0)], 1.0);
        assert_eq!(l.data.x[(1, 1)], 0.1);
    }

    #[test]
    fn response_on_unselected_row() {
        let spec = ModelSpec::from_toml(SPEC).unwrap();
        let csv = "y,d,x1,w1\n2,1,0.5,1\n3,0,0.1,-1\n";
        match read_dataset(csv.as_bytes(), &spec, false) {
            Err(Error::Schema { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("{other:?}"),
        }
        let l = read_dataset(csv.as_bytes(), &spec, true).unwrap();
        assert_eq!(l.warnings.len(), 1);
        assert_eq!(l.data.y[1], None);
    }

    #[test]
    fn spec_rejects_incompatible_mechanism() {
        let text = SPEC.replace("poisson", "normal");
        assert!(ModelSpec::from_toml(&text).is_err());
        let text = SPEC.replace("x_cols = [\"x1\"]", "x_cols = [\"y\"]");
        assert!(ModelSpec::from_toml(&text).is_err());
    }

    #[test]
    fn grid_keyword_and_list() {
        let s = ModelSpec::from_toml(&format!("{SPEC}grid = [0.0, 0.5]\n")).unwrap();
        assert_eq!(s.grid_config().unwrap(), GridConfig::Explicit(vec![0.0, 0.5]));
        let s = ModelSpec::from_toml(&format!("{SPEC}grid = \"auto\"\n")).unwrap();
        assert_eq!(s.grid_config().unwrap(), GridConfig::Auto);
        assert_eq!(parse_alphas("0, -1.5").unwrap(), GridConfig::Explicit(vec![0.0, -1.5]));
        assert!(parse_alphas("a").is_err());
    }
}
