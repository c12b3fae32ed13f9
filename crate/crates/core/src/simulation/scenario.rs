use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::signal::{make_signal, training_signal, Admissibility, InputSignal, SignalKind};
use super::SimulationError;
use crate::network::NetworkTopology;

/// Conversion of house demands from W to GW, matching energy densities in
/// GJ/m³ so that `q = u_H / y` is in m³/s.
pub const WATTS_TO_GIGAWATTS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Trapezoidal,
    Adaptive,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::Trapezoidal => "trapezoidal",
            Integrator::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimulationError> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "trapezoidal" => Ok(Integrator::Trapezoidal),
            "adaptive" => Ok(Integrator::Adaptive),
            other => Err(SimulationError::InvalidScenario(format!("unknown integrator '{other}'"))),
        }
    }
}

/// Step size control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub integrator: Integrator,
    /// Fixed step (or initial step of the adaptive scheme) in s.
    pub dt: f64,
    /// Explicit scheme only: choose every step as `cfl / max rate` instead of
    /// `dt`.
    pub cfl: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

impl StepControl {
    pub fn fixed(integrator: Integrator, dt: f64) -> Self {
        StepControl { integrator, dt, cfl: None, rtol: 1e-4, atol: 1e-7 }
    }

    pub fn explicit_cfl(cfl: f64) -> Self {
        StepControl { integrator: Integrator::Euler, dt: f64::INFINITY, cfl: Some(cfl), rtol: 1e-4, atol: 1e-7 }
    }
}

/// House demands in W over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DemandProfile {
    Constant(Vec<f64>),
    /// Piecewise linear in time, constant beyond the first and last knot.
    /// `values[k]` holds one demand per house at `times[k]`.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl DemandProfile {
    pub fn n_consumers(&self) -> usize {
        match self {
            DemandProfile::Constant(v) => v.len(),
            DemandProfile::Table { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    /// Demands in GW at time `t`.
    pub fn at(&self, t: f64, out: &mut [f64]) {
        match self {
            DemandProfile::Constant(v) => {
                for (o, w) in out.iter_mut().zip(v) {
                    *o = w * WATTS_TO_GIGAWATTS;
                }
            }
            DemandProfile::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 || k == times.len() {
                    let row = &values[k.saturating_sub(1)];
                    for (o, w) in out.iter_mut().zip(row) {
                        *o = w * WATTS_TO_GIGAWATTS;
                    }
                    return;
                }
                let s = (t - times[k - 1]) / (times[k] - times[k - 1]);
                for (h, o) in out.iter_mut().enumerate() {
                    *o = ((1.0 - s) * values[k - 1][h] + s * values[k][h]) * WATTS_TO_GIGAWATTS;
                }
            }
        }
    }

    /// Time average of the demands in W (the constant profile itself).
    pub fn mean(&self) -> Vec<f64> {
        match self {
            DemandProfile::Constant(v) => v.clone(),
            DemandProfile::Table { values, .. } => {
                let n = values.len() as f64;
                (0..self.n_consumers()).map(|h| values.iter().map(|r| r[h]).sum::<f64>() / n).collect()
            }
        }
    }

    fn validate(&self, houses: usize) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidScenario(m));
        if self.n_consumers() != houses {
            return bad(format!("{} demands for {houses} consumers", self.n_consumers()));
        }
        let rows: Vec<&Vec<f64>> = match self {
            DemandProfile::Constant(v) => vec![v],
            DemandProfile::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() || times.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("demand table needs increasing times, one row per time".into());
                }
                if values.iter().any(|r| r.len() != houses) {
                    return bad("demand table rows must list every consumer".into());
                }
                values.iter().collect()
            }
        };
        if let Some(w) = rows.iter().flat_map(|r| r.iter()).find(|w| !(**w > 0.0)) {
            return bad(format!("demands must be positive, got {w}"));
        }
        Ok(())
    }
}

/// Inputs of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub signal: InputSignal,
    pub demands: DemandProfile,
    pub horizon: f64,
    pub step: StepControl,
}

impl Scenario {
    pub fn new(
        signal: InputSignal,
        demands: DemandProfile,
        horizon: f64,
        step: StepControl,
        topology: &NetworkTopology,
    ) -> Result<Self, SimulationError> {
        let s = Scenario { signal, demands, horizon, step };
        s.validate(topology)?;
        Ok(s)
    }

    pub fn validate(&self, topology: &NetworkTopology) -> Result<(), SimulationError> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(SimulationError::InvalidScenario(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        let st = &self.step;
        if st.cfl.is_none() && !(st.dt > 0.0 && st.dt.is_finite()) {
            return Err(SimulationError::InvalidScenario(format!("dt must be positive, got {}", st.dt)));
        }
        if let Some(c) = st.cfl {
            if st.integrator != Integrator::Euler || !(c > 0.0) {
                return Err(SimulationError::InvalidScenario(
                    "cfl target needs the euler integrator and cfl > 0".into(),
                ));
            }
        }
        if st.integrator == Integrator::Adaptive && !(st.rtol > 0.0 && st.atol > 0.0) {
            return Err(SimulationError::InvalidScenario("adaptive integration needs rtol, atol > 0".into()));
        }
        self.demands.validate(topology.n_consumers())?;
        self.signal.check()
    }

    /// Reads a scenario file.
    ///
    /// ```json
    /// { "signal": {"kind": "in_sample"},
    ///   "demands": 10000,
    ///   "horizon_s": 28000, "dt_s": 20, "integrator": "trapezoidal" }
    /// ```
    ///
    /// `signal.kind` is `in_sample`, `out_of_sample`, `training` (with `m`) or
    /// `custom` (with `c0`, `harmonics` as `[a, b]` pairs and `period_s`).
    /// Optional `signal.bounds` overrides `u_low`, `u_high`, `max_slope`,
    /// `max_frequency`. `demands` is a number (all houses), an array, an
    /// object keyed by consumer id, or `{"times": [...], "values": [[...]]}`.
    pub fn from_json(text: &str, topology: &NetworkTopology) -> Result<Self, SimulationError> {
        let v: Value = serde_json::from_str(text).map_err(|e| SimulationError::Format(e.to_string()))?;
        let signal = parse_signal(v.get("signal").unwrap_or(&Value::Null))?;
        let demands = parse_demands(v.get("demands").ok_or_else(|| missing("demands"))?, topology)?;
        let horizon = number(&v, "horizon_s")?.unwrap_or(signal.period());
        let integrator = match v.get("integrator") {
            None => Integrator::Trapezoidal,
            Some(Value::String(s)) => Integrator::parse(s)?,
            Some(other) => return Err(SimulationError::Format(format!("integrator must be a string, got {other}"))),
        };
        let mut step = StepControl::fixed(integrator, number(&v, "dt_s")?.unwrap_or(10.0));
        step.cfl = number(&v, "cfl")?;
        if step.cfl.is_some() && v.get("dt_s").is_none() {
            step.dt = f64::INFINITY;
        }
        if let Some(r) = number(&v, "rtol")? {
            step.rtol = r;
        }
        if let Some(a) = number(&v, "atol")? {
            step.atol = a;
        }
        Scenario::new(signal, demands, horizon, step, topology)
    }

    pub fn from_file(path: &Path, topology: &NetworkTopology) -> Result<Self, SimulationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SimulationError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, topology)
    }
}

fn missing(key: &str) -> SimulationError {
    SimulationError::Format(format!("missing field '{key}'"))
}

fn number(v: &Value, key: &str) -> Result<Option<f64>, SimulationError> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => x.as_f64().map(Some).ok_or_else(|| SimulationError::Format(format!("'{key}' must be a number"))),
    }
}

fn parse_signal(v: &Value) -> Result<InputSignal, SimulationError> {
    let mut bounds = Admissibility::default();
    if let Some(b) = v.get("bounds") {
        for (key, slot) in [
            ("u_low", &mut bounds.u_low),
            ("u_high", &mut bounds.u_high),
            ("max_slope", &mut bounds.max_slope),
            ("max_frequency", &mut bounds.max_frequency),
        ] {
            if let Some(x) = number(b, key)? {
                *slot = x;
            }
        }
    }
    let kind = v.get("kind").and_then(Value::as_str).unwrap_or("in_sample");
    let mut signal = match kind {
        "in_sample" => make_signal(SignalKind::InSample)?,
        "out_of_sample" => make_signal(SignalKind::OutOfSample)?,
        "training" => {
            let m = number(v, "m")?.unwrap_or(1.0);
            return training_signal(bounds, m as usize);
        }
        "custom" => {
            let c0 = number(v, "c0")?.ok_or_else(|| missing("signal.c0"))?;
            let period = number(v, "period_s")?.ok_or_else(|| missing("signal.period_s"))?;
            let harmonics: Vec<(f64, f64)> = match v.get("harmonics") {
                None => Vec::new(),
                Some(h) => serde_json::from_value(h.clone())
                    .map_err(|e| SimulationError::Format(format!("signal.harmonics: {e}")))?,
            };
            InputSignal { c0, harmonics, omega: 2.0 * std::f64::consts::PI / period, bounds }
        }
        other => return Err(SimulationError::Format(format!("unknown signal kind '{other}'"))),
    };
    signal.bounds = bounds;
    signal.check()?;
    Ok(signal)
}

fn parse_demands(v: &Value, topology: &NetworkTopology) -> Result<DemandProfile, SimulationError> {
    let h = topology.n_consumers();
    let as_f64 = |x: &Value| x.as_f64().ok_or_else(|| SimulationError::Format(format!("demand {x} is not a number")));
    match v {
        Value::Number(_) => Ok(DemandProfile::Constant(vec![as_f64(v)?; h])),
        Value::Array(a) => Ok(DemandProfile::Constant(a.iter().map(as_f64).collect::<Result<_, _>>()?)),
        Value::Object(map) if map.contains_key("times") => {
            let table: DemandTable =
                serde_json::from_value(v.clone()).map_err(|e| SimulationError::Format(format!("demands: {e}")))?;
            Ok(DemandProfile::Table { times: table.times, values: table.values })
        }
        Value::Object(map) => {
            let labels = topology.consumer_labels();
            if let Some(k) = map.keys().find(|k| !labels.contains(k)) {
                return Err(SimulationError::InvalidScenario(format!("demand for unknown consumer '{k}'")));
            }
            let values = labels
                .iter()
                .map(|l| map.get(l).ok_or_else(|| missing(&format!("demands.{l}"))).and_then(as_f64))
                .collect::<Result<_, _>>()?;
            Ok(DemandProfile::Constant(values))
        }
        other => Err(SimulationError::Format(format!("unsupported demands value {other}"))),
    }
}

#[derive(Deserialize)]
struct DemandTable {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}
