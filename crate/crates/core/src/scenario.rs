//! Link budget and unit plumbing: converts a physical deployment (distances,
//! antenna gains, carrier frequency, path-loss exponent, dBm quantities) into
//! the linear, watt-denominated values the analysis works with, and reads
//! `key = value unit` scenario files.

use std::path::{Path, PathBuf};

use crate::analysis::SystemParams;
use crate::channel::{effective, NakagamiLink};
use crate::ehmodel::{load_samples_uw, EhModel, Sigmoid, Tabulated};
use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub freq_hz: f64,
    /// Power station to wireless device.
    pub d1_m: f64,
    /// Wireless device to information receiver.
    pub d2_m: f64,
    pub exponent: f64,
    pub gain_ps_dbi: f64,
    pub gain_irs_dbi: f64,
    pub gain_wd_dbi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    Downlink,
    Uplink,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Mean channel power gain G_tx·G_rx·(c/(4πf))²·d^{-exponent}, i.e. Friis at
/// a 1 m reference distance followed by a power-law decay.
pub fn mean_gain(lb: &LinkBudget, hop: Hop) -> f64 {
    let (d, g_tx, g_rx) = match hop {
        Hop::Downlink => (lb.d1_m, lb.gain_ps_dbi, lb.gain_wd_dbi),
        Hop::Uplink => (lb.d2_m, lb.gain_wd_dbi, lb.gain_irs_dbi),
    };
    let wavelength_term = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * lb.freq_hz);
    db_to_linear(g_tx + g_rx) * wavelength_term * wavelength_term * d.powf(-lb.exponent)
}

/// The reference deployment: 868 MHz, 4 m / 10 m hops, exponent 2.8,
/// 11/11/3 dBi antennas, σ² = -96 dBm, θ = 0.5, and the fitted sigmoid
/// harvester (a = 47083 /W, b = 2.9 µW, M = 9.079 µW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1 {
    pub link: LinkBudget,
    pub eh: Sigmoid,
    pub theta: f64,
    pub sigma2: f64,
}

pub fn table1_defaults() -> Table1 {
    Table1 {
        link: LinkBudget {
            freq_hz: 868e6,
            d1_m: 4.0,
            d2_m: 10.0,
            exponent: 2.8,
            gain_ps_dbi: 11.0,
            gain_irs_dbi: 11.0,
            gain_wd_dbi: 3.0,
        },
        eh: Sigmoid {
            max_power: 9.079e-6,
            a: 47_083.0,
            b: 2.9e-6,
        },
        theta: 0.5,
        sigma2: dbm_to_watts(-96.0),
    }
}

/// Which harvester a scenario uses.
#[derive(Debug, Clone, PartialEq)]
pub enum EhChoice {
    Sigmoid,
    Linear,
    Piecewise,
    Tabulated(PathBuf),
}

/// A fully resolved scenario: everything needed to build [`SystemParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pt_w: f64,
    pub tau: f64,
    pub rate: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub m1: u32,
    pub n1: u32,
    pub m2: u32,
    pub n2: u32,
    pub link: LinkBudget,
    /// Overrides for the per-branch mean gains; otherwise taken from `link`.
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub sigmoid: Sigmoid,
    /// Efficiency for the linear and piecewise models; defaults to the
    /// sigmoid's maximum slope.
    pub eta: Option<f64>,
    pub eh: EhChoice,
}

impl Default for Scenario {
    /// Reference deployment with m1 = m2 = 2, N1 = N2 = 1, τ = 0.5,
    /// R = 5 bits/s/Hz and P_t = 27 dBm.
    fn default() -> Self {
        let t = table1_defaults();
        Self {
            pt_w: dbm_to_watts(27.0),
            tau: 0.5,
            rate: 5.0,
            sigma2: t.sigma2,
            theta: t.theta,
            m1: 2,
            n1: 1,
            m2: 2,
            n2: 1,
            link: t.link,
            mu1: None,
            mu2: None,
            sigmoid: t.eh,
            eta: None,
            eh: EhChoice::Sigmoid,
        }
    }
}

impl Scenario {
    pub fn mu1(&self) -> f64 {
        self.mu1
            .unwrap_or_else(|| mean_gain(&self.link, Hop::Downlink))
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
            .unwrap_or_else(|| mean_gain(&self.link, Hop::Uplink))
    }

    pub fn eta(&self) -> f64 {
        self.eta
            .unwrap_or_else(|| self.sigmoid.max_slope().min(1.0))
    }

    pub fn eh_model(&self) -> Result<EhModel> {
        match &self.eh {
            EhChoice::Sigmoid => Ok(EhModel::NonLinearSigmoid(self.sigmoid)),
            EhChoice::Linear => EhModel::linear(self.eta()),
            EhChoice::Piecewise => EhModel::piecewise_linear(self.eta(), self.sigmoid.max_power),
            EhChoice::Tabulated(path) => {
                Ok(EhModel::Tabulated(Tabulated::new(&load_samples_uw(path)?)?))
            }
        }
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let dl = effective(&NakagamiLink::new(self.m1, self.n1, self.mu1())?);
        let ul = effective(&NakagamiLink::new(self.m2, self.n2, self.mu2())?);
        SystemParams::new(
            self.pt_w,
            self.tau,
            self.rate,
            self.sigma2,
            self.theta,
            dl,
            ul,
            self.eh_model()?,
        )
    }

    /// Applies one `key = value` assignment. Relative paths in `eh_data`
    /// resolve against `base_dir` when given.
    pub fn set(
        &mut self,
        key: &str,
        value: &str,
        base_dir: Option<&Path>,
    ) -> std::result::Result<(), String> {
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "pt" => self.pt_w = parse_power(value)?,
            "tau" => self.tau = parse_plain(value)?,
            "rate" => self.rate = parse_rate(value)?,
            "sigma2" | "noise" => self.sigma2 = parse_power(value)?,
            "theta" => self.theta = parse_plain(value)?,
            "m1" => self.m1 = parse_count(value)?,
            "n1" => self.n1 = parse_count(value)?,
            "m2" => self.m2 = parse_count(value)?,
            "n2" => self.n2 = parse_count(value)?,
            "freq" => self.link.freq_hz = parse_frequency(value)?,
            "d1" => self.link.d1_m = parse_distance(value)?,
            "d2" => self.link.d2_m = parse_distance(value)?,
            "exponent" => self.link.exponent = parse_plain(value)?,
            "gain_ps" => self.link.gain_ps_dbi = parse_gain_db(value)?,
            "gain_irs" => self.link.gain_irs_dbi = parse_gain_db(value)?,
            "gain_wd" => self.link.gain_wd_dbi = parse_gain_db(value)?,
            "mu1" => self.mu1 = Some(parse_linear_gain(value)?),
            "mu2" => self.mu2 = Some(parse_linear_gain(value)?),
            "eh" => {
                self.eh = match value.to_ascii_lowercase().as_str() {
                    "sigmoid" | "nonlinear" => EhChoice::Sigmoid,
                    "linear" => EhChoice::Linear,
                    "piecewise" => EhChoice::Piecewise,
                    "tabulated" => match &self.eh {
                        EhChoice::Tabulated(p) => EhChoice::Tabulated(p.clone()),
                        _ => return Err("eh = tabulated needs eh_data = <file> set first".into()),
                    },
                    other => return Err(format!("unknown EH model '{other}'")),
                }
            }
            "eh_data" => {
                let p = PathBuf::from(value);
                let p = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                };
                self.eh = EhChoice::Tabulated(p);
            }
            "eh_max" => self.sigmoid.max_power = parse_power(value)?,
            "a" => self.sigmoid.a = parse_per_watt(value)?,
            "b" => self.sigmoid.b = parse_power(value)?,
            "eta" => self.eta = Some(parse_plain(value)?),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Parses scenario text on top of the defaults. Unknown keys are errors.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut s = Scenario::default();
        s.apply_text(text, base_dir)?;
        Ok(s)
    }

    pub fn apply_text(&mut self, text: &str, base_dir: Option<&Path>) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected 'key = value', got '{line}'"),
                });
            };
            self.set(k, v, base_dir)
                .map_err(|msg| Error::Parse { line: idx + 1, msg })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        Scenario::parse(&text, path.parent())
    }

    /// `key = value` lines describing the resolved scenario.
    pub fn describe(&self) -> Vec<String> {
        let mut out = vec![
            format!(
                "pt = {:.9e} W ({:.4} dBm)",
                self.pt_w,
                watts_to_dbm(self.pt_w)
            ),
            format!("tau = {}", self.tau),
            format!("rate = {}", self.rate),
            format!(
                "sigma2 = {:.9e} W ({:.4} dBm)",
                self.sigma2,
                watts_to_dbm(self.sigma2)
            ),
            format!("theta = {}", self.theta),
            format!("m1 = {}", self.m1),
            format!("n1 = {}", self.n1),
            format!("m2 = {}", self.m2),
            format!("n2 = {}", self.n2),
            format!("freq = {} Hz", self.link.freq_hz),
            format!("d1 = {} m", self.link.d1_m),
            format!("d2 = {} m", self.link.d2_m),
            format!("exponent = {}", self.link.exponent),
            format!("gain_ps = {} dBi", self.link.gain_ps_dbi),
            format!("gain_irs = {} dBi", self.link.gain_irs_dbi),
            format!("gain_wd = {} dBi", self.link.gain_wd_dbi),
            format!("mu1 = {:.9e}", self.mu1()),
            format!("mu2 = {:.9e}", self.mu2()),
            format!("eh_max = {:.9e} W", self.sigmoid.max_power),
            format!("a = {}", self.sigmoid.a),
            format!("b = {:.9e} W", self.sigmoid.b),
        ];
        match &self.eh {
            EhChoice::Sigmoid => out.push("eh = sigmoid".into()),
            EhChoice::Linear => out.push(format!("eh = linear (eta = {})", self.eta())),
            EhChoice::Piecewise => out.push(format!("eh = piecewise (eta = {})", self.eta())),
            EhChoice::Tabulated(p) => out.push(format!("eh = tabulated ({})", p.display())),
        }
        out
    }
}

fn split_unit(value: &str) -> std::result::Result<(f64, String), String> {
    let v = value.trim();
    let idx = v
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && is_exponent(v, i)))
        })
        .map(|(i, _)| i)
        .unwrap_or(v.len());
    let (num, unit) = v.split_at(idx);
    let x: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in '{value}'"))?;
    if !x.is_finite() {
        return Err(format!("non-finite value '{value}'"));
    }
    Ok((x, unit.trim().to_string()))
}

fn is_exponent(v: &str, i: usize) -> bool {
    let rest = &v[i + 1..];
    i > 0
        && rest
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+')
}

/// Power in W; accepts W, mW, uW/µW, nW, pW, dBm and dBW suffixes.
pub fn parse_power(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    let w = match unit.as_str() {
        "" | "W" | "w" => x,
        "mW" => x * 1e-3,
        "uW" | "µW" | "μW" => x * 1e-6,
        "nW" => x * 1e-9,
        "pW" => x * 1e-12,
        "dBm" | "dbm" => dbm_to_watts(x),
        "dBW" | "dbw" => dbm_to_watts(x + 30.0),
        other => return Err(format!("unknown power unit '{other}'")),
    };
    Ok(w)
}

fn parse_plain(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    if unit.is_empty() {
        Ok(x)
    } else {
        Err(format!("unexpected unit '{unit}'"))
    }
}

fn parse_rate(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    match unit.as_str() {
        "" | "bps/Hz" | "bits/s/Hz" => Ok(x),
        other => Err(format!("unknown rate unit '{other}'")),
    }
}

fn parse_count(value: &str) -> std::result::Result<u32, String> {
    value
        .trim()
        .parse::<u32>()
        .map_err(|_| format!("expected a positive integer, got '{value}'"))
}

fn parse_frequency(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    Ok(match unit.as_str() {
        "" | "Hz" => x,
        "kHz" => x * 1e3,
        "MHz" => x * 1e6,
        "GHz" => x * 1e9,
        other => return Err(format!("unknown frequency unit '{other}'")),
    })
}

fn parse_distance(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    Ok(match unit.as_str() {
        "" | "m" => x,
        "cm" => x * 1e-2,
        "km" => x * 1e3,
        other => return Err(format!("unknown distance unit '{other}'")),
    })
}

fn parse_gain_db(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    match unit.as_str() {
        "" | "dBi" | "dB" => Ok(x),
        other => Err(format!("unknown gain unit '{other}'")),
    }
}

fn parse_linear_gain(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    match unit.as_str() {
        "" => Ok(x),
        "dB" => Ok(db_to_linear(x)),
        other => Err(format!("unknown gain unit '{other}'")),
    }
}

fn parse_per_watt(value: &str) -> std::result::Result<f64, String> {
    let (x, unit) = split_unit(value)?;
    Ok(match unit.as_str() {
        "" | "/W" | "1/W" => x,
        "/mW" | "1/mW" => x * 1e3,
        "/uW" | "1/uW" | "/µW" => x * 1e6,
        other => return Err(format!("unknown unit '{other}' for a")),
    })
}
