//! Ramp-up load generation and throughput reports.
//!
//! Workers are closed-loop virtual users: each issues its next request when
//! the previous one returns, optionally after a think time. Worker `i`
//! starts at `i · ramp / peak`, so fast mode reaches peak inside its 2 s
//! window and slow mode grows linearly.
//!
//! All plan times are nominal seconds. A `time_scale` above 1 compresses
//! the run; the synthetic backend honors the same scale when it sleeps.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::backends::{Backend, ErrorClass, GenerationRequest};
use crate::eval::{render_table, Latency};
use crate::metrics::LatencyPercentiles;

pub const FAST_RAMP_S: f64 = 2.0;
pub const SLOW_RAMP_RANGE_S: (f64, f64) = (60.0, 360.0);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("run time must be positive")]
    ZeroRunTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampMode {
    Fast,
    Slow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampPlan {
    pub mode: RampMode,
    pub peak: usize,
    pub ramp_s: f64,
    pub duration_s: f64,
    /// Pause between a response and the worker's next request.
    #[serde(default)]
    pub think_time_s: f64,
    /// Nominal seconds per wall-clock second.
    #[serde(default = "unit_scale")]
    pub time_scale: f64,
    pub request: GenerationRequest,
}

fn unit_scale() -> f64 {
    1.0
}

impl RampPlan {
    pub fn fast(peak: usize, duration_s: f64, request: GenerationRequest) -> Self {
        Self {
            mode: RampMode::Fast,
            peak,
            ramp_s: FAST_RAMP_S,
            duration_s,
            think_time_s: 0.0,
            time_scale: 1.0,
            request,
        }
    }

    pub fn slow(peak: usize, ramp_s: f64, duration_s: f64, request: GenerationRequest) -> Self {
        Self {
            mode: RampMode::Slow,
            ramp_s,
            ..Self::fast(peak, duration_s, request)
        }
    }

    pub fn validate(&self) -> Result<(), LoadError> {
        let fail = |m: String| Err(LoadError::InvalidPlan(m));
        if self.peak == 0 {
            return fail("peak concurrency must be at least 1".into());
        }
        for (name, v) in [
            ("ramp", self.ramp_s),
            ("duration", self.duration_s),
            ("think time", self.think_time_s),
            ("time scale", self.time_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} must be finite and non-negative"));
            }
        }
        if self.duration_s <= 0.0 || self.time_scale <= 0.0 {
            return fail("duration and time scale must be positive".into());
        }
        if self.ramp_s > self.duration_s {
            return fail(format!(
                "ramp {} s exceeds run time {} s",
                self.ramp_s, self.duration_s
            ));
        }
        match self.mode {
            RampMode::Fast if self.ramp_s > FAST_RAMP_S => {
                fail(format!("fast ramp must finish within {FAST_RAMP_S} s"))
            }
            RampMode::Slow if !(SLOW_RAMP_RANGE_S.0..=SLOW_RAMP_RANGE_S.1).contains(&self.ramp_s) => {
                fail("slow ramp must last between 1 and 6 minutes".into())
            }
            _ => self
                .request
                .validate()
                .map_err(|e| LoadError::InvalidPlan(e.to_string())),
        }
    }

    /// Nominal start time of worker `i`.
    pub fn start_offset(&self, worker: usize) -> f64 {
        worker as f64 * self.ramp_s / self.peak as f64
    }

    /// Workers the schedule has started by nominal time `t`.
    pub fn planned_workers(&self, t: f64) -> usize {
        if t < 0.0 {
            return 0;
        }
        if self.ramp_s == 0.0 {
            return self.peak;
        }
        ((t * self.peak as f64 / self.ramp_s).floor() as usize + 1).min(self.peak)
    }

    /// The straight-line schedule `peak · t / ramp`, capped at peak.
    pub fn linear_workers(&self, t: f64) -> f64 {
        if self.ramp_s == 0.0 {
            return self.peak as f64;
        }
        (self.peak as f64 * t / self.ramp_s).clamp(0.0, self.peak as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub success: bool,
    /// Backend-reported latency for successes, measured nominal time for
    /// failures.
    pub latency_s: f64,
    #[serde(default)]
    pub error: Option<ErrorClass>,
}

impl RequestOutcome {
    pub fn ok(latency_s: f64) -> Self {
        Self {
            success: true,
            latency_s,
            error: None,
        }
    }

    pub fn failed(latency_s: f64, class: ErrorClass) -> Self {
        Self {
            success: false,
            latency_s,
            error: Some(class),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub run_millis: u64,
    pub total: u64,
    pub failures: u64,
    pub rpm: f64,
    pub failure_pct: f64,
    pub fpm: f64,
    pub latency: Option<Latency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_reached_s: Option<f64>,
}

/// Aggregates outcomes over a run of `run_millis` nominal milliseconds.
/// Latency percentiles cover successful requests only.
pub fn summarize(outcomes: &[RequestOutcome], run_millis: u64) -> Result<LoadReport, LoadError> {
    if run_millis == 0 {
        return Err(LoadError::ZeroRunTime);
    }
    let total = outcomes.len() as u64;
    let failures = outcomes.iter().filter(|o| !o.success).count() as u64;
    let successes: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.success)
        .map(|o| o.latency_s)
        .collect();
    let latency = LatencyPercentiles::from_samples(&successes)
        .ok()
        .map(Latency::from);
    let mut report = LoadReport {
        run_millis,
        total,
        failures,
        rpm: 0.0,
        failure_pct: 0.0,
        fpm: 0.0,
        note: latency
            .is_none()
            .then(|| "no successful requests; latency percentiles omitted".to_owned()),
        latency,
        max_in_flight: None,
        peak_reached_s: None,
    };
    report.rpm = to_f64(report.rpm_exact());
    report.fpm = to_f64(report.fpm_exact());
    report.failure_pct = report.failure_pct_exact().map_or(0.0, to_f64);
    Ok(report)
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `r` rounded half-up to one decimal, as text.
fn one_decimal(r: Ratio<u64>) -> String {
    let tenths = (r * 10).round().to_integer();
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Integers print bare, anything else with one decimal.
fn compact(r: Ratio<u64>) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        one_decimal(r)
    }
}

impl LoadReport {
    pub fn rpm_exact(&self) -> Ratio<u64> {
        Ratio::new(self.total * 60_000, self.run_millis)
    }

    pub fn fpm_exact(&self) -> Ratio<u64> {
        Ratio::new(self.failures * 60_000, self.run_millis)
    }

    /// Undefined for an empty run.
    pub fn failure_pct_exact(&self) -> Option<Ratio<u64>> {
        (self.total > 0).then(|| Ratio::new(self.failures * 100, self.total))
    }

    pub fn run_minutes_exact(&self) -> Ratio<u64> {
        Ratio::new(self.run_millis, 60_000)
    }

    /// Run time, total, RPM, failures, failure %, FPM, P10, P50, P90.
    pub fn cells(&self) -> [String; 9] {
        let latency = |f: fn(&Latency) -> f64| {
            self.latency
                .as_ref()
                .map_or("-".to_owned(), |l| format!("{:.1}", f(l)))
        };
        [
            compact(self.run_minutes_exact()),
            self.total.to_string(),
            compact(self.rpm_exact()),
            self.failures.to_string(),
            self.failure_pct_exact().map_or("-".to_owned(), one_decimal),
            compact(self.fpm_exact()),
            latency(|l| l.p10),
            latency(|l| l.p50),
            latency(|l| l.p90),
        ]
    }

    /// `total & RPM & failures & failure % & FPM`.
    pub fn throughput_row(&self) -> String {
        let c = self.cells();
        [&c[1], &c[2], &c[3], &c[4], &c[5]]
            .map(String::as_str)
            .join(" & ")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn render_load_table(reports: &[LoadReport]) -> String {
    let header = [
        "Run time (min)",
        "Total requests",
        "RPM",
        "Failures",
        "Failures %",
        "FPM",
        "Latency P10",
        "Latency P50",
        "Latency P90",
    ];
    let body: Vec<[String; 9]> = reports.iter().map(LoadReport::cells).collect();
    render_table(&header, &body)
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_load_table(std::slice::from_ref(self)))?;
        if let Some(note) = &self.note {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

/// One request as observed by the load driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimedOutcome {
    pub worker: usize,
    pub started_s: f64,
    pub finished_s: f64,
    pub outcome: RequestOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadRun {
    pub report: LoadReport,
    /// Completion order.
    pub outcomes: Vec<TimedOutcome>,
    /// Nominal time each worker issued its first request.
    pub worker_starts: Vec<f64>,
}

struct Clock {
    origin: Instant,
    scale: f64,
}

impl Clock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * self.scale
    }

    fn sleep_until(&self, nominal: f64) {
        let target = self.origin + Duration::from_secs_f64(nominal / self.scale);
        let now = Instant::now();
        if target > now {
            thread::sleep(target - now);
        }
    }
}

/// Drives the plan against `backend` and summarizes it. Requests still in
/// flight at the end of the run are awaited and counted.
pub fn run_load(plan: &RampPlan, backend: Arc<dyn Backend>) -> Result<LoadRun, LoadError> {
    plan.validate()?;
    let clock = Arc::new(Clock {
        origin: Instant::now(),
        scale: plan.time_scale,
    });
    let in_flight = Arc::new(AtomicUsize::new(0));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let peak_reached = Arc::new(Mutex::new(None::<f64>));
    let outcomes = Arc::new(Mutex::new(Vec::new()));

    let handles: Vec<_> = (0..plan.peak)
        .map(|worker| {
            let plan = plan.clone();
            let backend = Arc::clone(&backend);
            let clock = Arc::clone(&clock);
            let in_flight = Arc::clone(&in_flight);
            let max_in_flight = Arc::clone(&max_in_flight);
            let peak_reached = Arc::clone(&peak_reached);
            let outcomes = Arc::clone(&outcomes);
            thread::spawn(move || {
                clock.sleep_until(plan.start_offset(worker));
                let mut first_start = None;
                let mut seq = 0usize;
                loop {
                    let started = clock.now();
                    if started >= plan.duration_s {
                        break;
                    }
                    first_start.get_or_insert(started);
                    let request = GenerationRequest {
                        id: format!("{}-{worker}-{seq}", plan.request.id),
                        ..plan.request.clone()
                    };
                    seq += 1;
                    let now_in_flight = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now_in_flight, Ordering::SeqCst);
                    if now_in_flight == plan.peak {
                        peak_reached.lock().expect("peak lock").get_or_insert(clock.now());
                    }
                    let result = backend.generate(&request);
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    let finished = clock.now();
                    let outcome = match result {
                        Ok(r) => RequestOutcome::ok(r.latency_s),
                        Err(e) => RequestOutcome::failed(finished - started, e.class()),
                    };
                    outcomes.lock().expect("outcome lock").push(TimedOutcome {
                        worker,
                        started_s: started,
                        finished_s: finished,
                        outcome,
                    });
                    if plan.think_time_s > 0.0 {
                        clock.sleep_until(finished + plan.think_time_s);
                    }
                }
                first_start
            })
        })
        .collect();
    let worker_starts: Vec<f64> = handles
        .into_iter()
        .map(|h| h.join().expect("load worker panicked").unwrap_or(f64::NAN))
        .collect();

    let outcomes = Arc::try_unwrap(outcomes)
        .expect("workers joined")
        .into_inner()
        .expect("outcome lock");
    let plain: Vec<RequestOutcome> = outcomes.iter().map(|o| o.outcome).collect();
    let run_millis = (plan.duration_s * 1000.0).round() as u64;
    let mut report = summarize(&plain, run_millis.max(1))?;
    report.max_in_flight = Some(max_in_flight.load(Ordering::SeqCst));
    report.peak_reached_s = *peak_reached.lock().expect("peak lock");
    Ok(LoadRun {
        report,
        outcomes,
        worker_starts,
    })
}
