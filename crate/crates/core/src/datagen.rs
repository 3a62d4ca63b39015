//! Seeded synthetic `(x, w, f, g)` fixtures: smooth, spiky and fat-tailed processes.
//!
//! Scenarios are described in a plain-text key-value format, one `key = value` pair per
//! line, `#` starting a comment:
//!
//! ```text
//! name = spikes
//! samples = 10000
//! seed = 7
//! x_law = uniform_random
//! x_range = -1 1
//! weight_law = unit
//! f_law = spikes rate=0.01 magnitude=1000
//! g_law = sine amplitude=1 frequency=2
//! ```
//!
//! Laws are a name followed by `key=value` parameters:
//!
//! * `x_law`: `uniform_grid` (endpoints included), `uniform_random`,
//!   `clustered centers=<k> width=<σ>` (Gaussian clusters, clamped to `x_range`).
//! * `weight_law`: `unit`, `constant value=<w>`, `random_positive min=<a> max=<b>`.
//! * `f_law` / `g_law`: `affine_of_x slope= intercept=`, `sine amplitude= frequency= phase=`
//!   (`A sin(π ν x + φ)`), `poly coeffs=c0,c1,...`, `spikes rate= magnitude=` (baseline
//!   `sin(π x)` plus `magnitude` at a fraction `rate` of samples), `student_t nu= scale= loc=`.
//!   `g_law` also accepts `affine_of_f slope= intercept=` and `none`.
//!
//! Generation uses ChaCha8 with one stream per column, so the same spec and seed give
//! bit-identical samples on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};

use crate::error::{Error, Result};
use crate::moments::SampleSet;

#[derive(Debug, Clone, PartialEq)]
pub enum XLaw {
    UniformGrid,
    UniformRandom,
    Clustered { centers: usize, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightLaw {
    Unit,
    Constant { value: f64 },
    RandomPositive { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueLaw {
    AffineOfX {
        slope: f64,
        intercept: f64,
    },
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    Poly {
        coeffs: Vec<f64>,
    },
    Spikes {
        rate: f64,
        magnitude: f64,
    },
    StudentT {
        nu: f64,
        scale: f64,
        loc: f64,
    },
    /// Only meaningful for `g`: an affine function of the generated `f`.
    AffineOfF {
        slope: f64,
        intercept: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub samples: usize,
    pub seed: u64,
    pub x_law: XLaw,
    pub x_range: (f64, f64),
    pub weight_law: WeightLaw,
    pub f_law: ValueLaw,
    pub g_law: Option<ValueLaw>,
}

const STREAM_X: u64 = 0;
const STREAM_W: u64 = 1;
const STREAM_F: u64 = 2;
const STREAM_G: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(format!("scenario `{}`: {msg}", self.name)));
        if self.samples < 1 {
            return cfg("needs at least one sample".into());
        }
        let (lo, hi) = self.x_range;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return cfg(format!("invalid x_range [{lo}, {hi}]"));
        }
        match self.x_law {
            XLaw::Clustered { centers, width } if centers == 0 || width <= 0.0 || !width.is_finite() => {
                return cfg("clustered law needs centers >= 1 and width > 0".into());
            }
            _ => {}
        }
        match self.weight_law {
            WeightLaw::Unit => {}
            WeightLaw::Constant { value } if value > 0.0 && value.is_finite() => {}
            WeightLaw::RandomPositive { min, max } if min > 0.0 && max >= min && max.is_finite() => {}
            _ => return cfg("weights must be strictly positive and finite".into()),
        }
        validate_value_law(&self.f_law, false).or_else(|e| cfg(format!("f_law: {e}")))?;
        if let Some(g) = &self.g_law {
            validate_value_law(g, true).or_else(|e| cfg(format!("g_law: {e}")))?;
        }
        Ok(())
    }

    /// Renders the spec in the scenario file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let x = match &self.x_law {
            XLaw::UniformGrid => "uniform_grid".to_string(),
            XLaw::UniformRandom => "uniform_random".to_string(),
            XLaw::Clustered { centers, width } => format!("clustered centers={centers} width={width:?}"),
        };
        let _ = writeln!(s, "x_law = {x}");
        let _ = writeln!(s, "x_range = {:?} {:?}", self.x_range.0, self.x_range.1);
        let w = match self.weight_law {
            WeightLaw::Unit => "unit".to_string(),
            WeightLaw::Constant { value } => format!("constant value={value:?}"),
            WeightLaw::RandomPositive { min, max } => format!("random_positive min={min:?} max={max:?}"),
        };
        let _ = writeln!(s, "weight_law = {w}");
        let _ = writeln!(s, "f_law = {}", value_law_text(&self.f_law));
        let g = self.g_law.as_ref().map_or("none".to_string(), value_law_text);
        let _ = writeln!(s, "g_law = {g}");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Input(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim().to_string();
            if fields
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Input(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        let mut take = |key: &str| fields.remove(key);
        let req = |v: Option<(usize, String)>, key: &str| {
            v.ok_or_else(|| Error::Input(format!("missing required key `{key}`")))
        };

        let name = take("name").map_or_else(|| "unnamed".to_string(), |(_, v)| v);
        let (ln, samples) = req(take("samples"), "samples")?;
        let samples = samples
            .parse::<usize>()
            .map_err(|e| Error::Input(format!("line {ln}: samples: {e}")))?;
        let seed = match take("seed") {
            Some((ln, v)) => v
                .parse::<u64>()
                .map_err(|e| Error::Input(format!("line {ln}: seed: {e}")))?,
            None => 0,
        };
        let x_law = match take("x_law") {
            Some((ln, v)) => parse_x_law(&v).map_err(|e| at_line(ln, e))?,
            None => XLaw::UniformRandom,
        };
        let x_range = match take("x_range") {
            Some((ln, v)) => {
                let nums = parse_numbers(&v).map_err(|e| at_line(ln, e))?;
                if nums.len() != 2 {
                    return Err(Error::Input(format!("line {ln}: x_range needs two numbers")));
                }
                (nums[0], nums[1])
            }
            None => (-1.0, 1.0),
        };
        let weight_law = match take("weight_law") {
            Some((ln, v)) => parse_weight_law(&v).map_err(|e| at_line(ln, e))?,
            None => WeightLaw::Unit,
        };
        let (ln, f) = req(take("f_law"), "f_law")?;
        let f_law = parse_value_law(&f).map_err(|e| at_line(ln, e))?;
        let g_law = match take("g_law") {
            Some((_, v)) if v == "none" => None,
            Some((ln, v)) => Some(parse_value_law(&v).map_err(|e| at_line(ln, e))?),
            None => None,
        };
        if let Some((key, (ln, _))) = fields.into_iter().next() {
            return Err(Error::Input(format!("line {ln}: unknown key `{key}`")));
        }
        let spec = Self {
            name,
            samples,
            seed,
            x_law,
            x_range,
            weight_law,
            f_law,
            g_law,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Input(m) | Error::Config(m) => Error::Input(format!("line {line}: {m}")),
        other => other,
    }
}

fn validate_value_law(law: &ValueLaw, allow_f: bool) -> std::result::Result<(), String> {
    let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
    match law {
        ValueLaw::AffineOfX { slope, intercept } if finite(&[*slope, *intercept]) => Ok(()),
        ValueLaw::Sine {
            amplitude,
            frequency,
            phase,
        } if finite(&[*amplitude, *frequency, *phase]) => Ok(()),
        ValueLaw::Poly { coeffs } if !coeffs.is_empty() && finite(coeffs) => Ok(()),
        ValueLaw::Spikes { rate, magnitude } if (0.0..=1.0).contains(rate) && magnitude.is_finite() => Ok(()),
        ValueLaw::StudentT { nu, scale, loc } => {
            if *nu <= 1.0 || !nu.is_finite() {
                Err(format!("student_t needs nu > 1 for a finite mean, got {nu}"))
            } else if *scale <= 0.0 || !finite(&[*scale, *loc]) {
                Err("student_t needs a positive finite scale".into())
            } else {
                Ok(())
            }
        }
        ValueLaw::AffineOfF { slope, intercept } if allow_f && finite(&[*slope, *intercept]) => Ok(()),
        ValueLaw::AffineOfF { .. } if !allow_f => Err("affine_of_f is only valid for g".into()),
        other => Err(format!("invalid parameters in {other:?}")),
    }
}

fn value_law_text(law: &ValueLaw) -> String {
    match law {
        ValueLaw::AffineOfX { slope, intercept } => {
            format!("affine_of_x slope={slope:?} intercept={intercept:?}")
        }
        ValueLaw::Sine {
            amplitude,
            frequency,
            phase,
        } => {
            format!("sine amplitude={amplitude:?} frequency={frequency:?} phase={phase:?}")
        }
        ValueLaw::Poly { coeffs } => {
            let c: Vec<String> = coeffs.iter().map(|c| format!("{c:?}")).collect();
            format!("poly coeffs={}", c.join(","))
        }
        ValueLaw::Spikes { rate, magnitude } => format!("spikes rate={rate:?} magnitude={magnitude:?}"),
        ValueLaw::StudentT { nu, scale, loc } => format!("student_t nu={nu:?} scale={scale:?} loc={loc:?}"),
        ValueLaw::AffineOfF { slope, intercept } => {
            format!("affine_of_f slope={slope:?} intercept={intercept:?}")
        }
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Input(format!("`{t}` is not a number")))
        })
        .collect()
}

struct LawArgs {
    name: String,
    params: BTreeMap<String, String>,
}

impl LawArgs {
    fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let name = tokens
            .next()
            .ok_or_else(|| Error::Input("empty law".into()))?
            .to_string();
        let mut params = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("law parameter `{tok}` is not `key=value`")))?;
            params.insert(k.to_string(), v.to_string());
        }
        Ok(Self { name, params })
    }

    fn num(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.remove(key) {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("{}: `{key}={v}` is not a number", self.name))),
            None => default.ok_or_else(|| Error::Input(format!("{}: missing parameter `{key}`", self.name))),
        }
    }

    fn finish<T>(self, value: T) -> Result<T> {
        match self.params.keys().next() {
            Some(k) => Err(Error::Input(format!("{}: unknown parameter `{k}`", self.name))),
            None => Ok(value),
        }
    }
}

fn parse_x_law(text: &str) -> Result<XLaw> {
    let mut a = LawArgs::parse(text)?;
    let law = match a.name.as_str() {
        "uniform_grid" => XLaw::UniformGrid,
        "uniform_random" => XLaw::UniformRandom,
        "clustered" => {
            let centers = a.num("centers", Some(3.0))?;
            if centers < 1.0 || centers.fract() != 0.0 {
                return Err(Error::Input(format!(
                    "clustered: centers must be a positive integer, got {centers}"
                )));
            }
            XLaw::Clustered {
                centers: centers as usize,
                width: a.num("width", Some(0.1))?,
            }
        }
        other => return Err(Error::Input(format!("unknown x_law `{other}`"))),
    };
    a.finish(law)
}

fn parse_weight_law(text: &str) -> Result<WeightLaw> {
    let mut a = LawArgs::parse(text)?;
    let law = match a.name.as_str() {
        "unit" => WeightLaw::Unit,
        "constant" => WeightLaw::Constant {
            value: a.num("value", None)?,
        },
        "random_positive" => WeightLaw::RandomPositive {
            min: a.num("min", Some(0.5))?,
            max: a.num("max", Some(1.5))?,
        },
        other => return Err(Error::Input(format!("unknown weight_law `{other}`"))),
    };
    a.finish(law)
}

fn parse_value_law(text: &str) -> Result<ValueLaw> {
    let mut a = LawArgs::parse(text)?;
    let law = match a.name.as_str() {
        "affine_of_x" => ValueLaw::AffineOfX {
            slope: a.num("slope", Some(1.0))?,
            intercept: a.num("intercept", Some(0.0))?,
        },
        "sine" => ValueLaw::Sine {
            amplitude: a.num("amplitude", Some(1.0))?,
            frequency: a.num("frequency", Some(1.0))?,
            phase: a.num("phase", Some(0.0))?,
        },
        "poly" => {
            let coeffs = a
                .params
                .remove("coeffs")
                .ok_or_else(|| Error::Input("poly: missing parameter `coeffs`".into()))?;
            ValueLaw::Poly {
                coeffs: parse_numbers(&coeffs)?,
            }
        }
        "spikes" => ValueLaw::Spikes {
            rate: a.num("rate", None)?,
            magnitude: a.num("magnitude", None)?,
        },
        "student_t" => ValueLaw::StudentT {
            nu: a.num("nu", None)?,
            scale: a.num("scale", Some(1.0))?,
            loc: a.num("loc", Some(0.0))?,
        },
        "affine_of_f" => ValueLaw::AffineOfF {
            slope: a.num("slope", Some(1.0))?,
            intercept: a.num("intercept", Some(0.0))?,
        },
        other => return Err(Error::Input(format!("unknown value law `{other}`"))),
    };
    a.finish(law)
}

fn generate_x(spec: &ScenarioSpec) -> Vec<f64> {
    let (lo, hi) = spec.x_range;
    let m = spec.samples;
    let mut r = rng(spec.seed, STREAM_X);
    match spec.x_law {
        XLaw::UniformGrid => {
            if m == 1 {
                return vec![0.5 * (lo + hi)];
            }
            (0..m)
                .map(|l| {
                    if l == m - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * l as f64 / (m - 1) as f64
                    }
                })
                .collect()
        }
        XLaw::UniformRandom => (0..m).map(|_| lo + (hi - lo) * r.random::<f64>()).collect(),
        XLaw::Clustered { centers, width } => {
            let c: Vec<f64> = (0..centers).map(|_| lo + (hi - lo) * r.random::<f64>()).collect();
            let normal = Normal::new(0.0, width).expect("validated width");
            (0..m)
                .map(|_| {
                    let k = r.random_range(0..centers);
                    (c[k] + normal.sample(&mut r)).clamp(lo, hi)
                })
                .collect()
        }
    }
}

fn generate_values(law: &ValueLaw, x: &[f64], f: Option<&[f64]>, r: &mut ChaCha8Rng) -> Vec<f64> {
    use std::f64::consts::PI;
    match law {
        ValueLaw::AffineOfX { slope, intercept } => x.iter().map(|v| slope * v + intercept).collect(),
        ValueLaw::Sine {
            amplitude,
            frequency,
            phase,
        } => x
            .iter()
            .map(|v| amplitude * (PI * frequency * v + phase).sin())
            .collect(),
        ValueLaw::Poly { coeffs } => x
            .iter()
            .map(|&v| coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c))
            .collect(),
        ValueLaw::Spikes { rate, magnitude } => x
            .iter()
            .map(|v| {
                let base = (PI * v).sin();
                if r.random::<f64>() < *rate {
                    base + magnitude
                } else {
                    base
                }
            })
            .collect(),
        ValueLaw::StudentT { nu, scale, loc } => {
            let t = StudentT::new(*nu).expect("validated nu");
            x.iter().map(|_| loc + scale * t.sample(r)).collect()
        }
        ValueLaw::AffineOfF { slope, intercept } => f
            .expect("affine_of_f needs f")
            .iter()
            .map(|v| slope * v + intercept)
            .collect(),
    }
}

/// Deterministic sample set for a scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<SampleSet> {
    spec.validate()?;
    let x = generate_x(spec);
    let mut wr = rng(spec.seed, STREAM_W);
    let w: Vec<f64> = match spec.weight_law {
        WeightLaw::Unit => vec![1.0; spec.samples],
        WeightLaw::Constant { value } => vec![value; spec.samples],
        WeightLaw::RandomPositive { min, max } => (0..spec.samples)
            .map(|_| {
                if max > min {
                    wr.random_range(min..=max)
                } else {
                    min
                }
            })
            .collect(),
    };
    let f = generate_values(&spec.f_law, &x, None, &mut rng(spec.seed, STREAM_F));
    let g = spec
        .g_law
        .as_ref()
        .map(|law| generate_values(law, &x, Some(&f), &mut rng(spec.seed, STREAM_G)));
    SampleSet::new(x, w, f, g)
}

const BUILTIN: &[(&str, &str)] = &[
    ("two_atom", include_str!("../scenarios/two_atom.scn")),
    ("gauss_uniform", include_str!("../scenarios/gauss_uniform.scn")),
    ("smooth", include_str!("../scenarios/smooth.scn")),
    ("mirror", include_str!("../scenarios/mirror.scn")),
    ("clustered", include_str!("../scenarios/clustered.scn")),
    ("spikes", include_str!("../scenarios/spikes.scn")),
    ("fat_tail", include_str!("../scenarios/fat_tail.scn")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Raw text of a built-in scenario file.
pub fn builtin_text(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin(name: &str) -> Option<Result<ScenarioSpec>> {
    builtin_text(name).map(ScenarioSpec::parse)
}
