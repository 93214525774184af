//! Seeded synthetic market data with daily and weekly cycles, renewables, and
//! heavy-tailed price spikes.

use std::f64::consts::PI;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Dataset, ExogenousSet, TimeSeries};

/// Tail index of the spike magnitude distribution.
pub const SPIKE_SHAPE: f64 = 1.5;
pub const SYNTH_REGION: &str = "SYNTH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_hours: usize,
    pub seed: u64,
    pub start: NaiveDateTime,
    /// Mean demand in MW.
    pub base_demand: f64,
    /// Demand swing of the daily cycle in MW.
    pub daily_amplitude: f64,
    /// Demand swing of the weekly cycle in MW.
    pub weekly_amplitude: f64,
    pub demand_noise_sd: f64,
    /// Extra MW per degree away from 18 C.
    pub temperature_coupling: f64,
    pub base_price: f64,
    /// Price response per MW of demand above `base_demand`.
    pub demand_coupling: f64,
    /// Price reduction per MW of solar plus wind output.
    pub merit_order_discount: f64,
    pub spike_prob: f64,
    /// Minimum spike size; spikes are Pareto distributed above it.
    pub spike_scale: f64,
    pub noise_sd: f64,
    pub price_cap: f64,
    pub price_floor: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_hours: 8760,
            seed: 42,
            start: NaiveDate::from_ymd_opt(2024, 1, 1)
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .expect("valid date"),
            base_demand: 7500.0,
            daily_amplitude: 1500.0,
            weekly_amplitude: 400.0,
            demand_noise_sd: 150.0,
            temperature_coupling: 60.0,
            base_price: 80.0,
            demand_coupling: 0.03,
            merit_order_discount: 0.01,
            spike_prob: 0.01,
            spike_scale: 100.0,
            noise_sd: 8.0,
            price_cap: 17500.0,
            price_floor: -1000.0,
        }
    }
}

fn check(cond: bool, path: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(path, msg))
    }
}

impl SynthConfig {
    /// Shortest series the default feature layout can backtest on at all.
    pub const MIN_HOURS: usize = 336 + 2 * 168;

    pub fn validate(&self, path: &str) -> Result<()> {
        let p = |f: &str| format!("{path}.{f}");
        check(
            self.n_hours >= Self::MIN_HOURS,
            &p("n_hours"),
            &format!("must be at least {}", Self::MIN_HOURS),
        )?;
        check(
            (0.0..=1.0).contains(&self.spike_prob),
            &p("spike_prob"),
            "must be in [0, 1]",
        )?;
        for (name, v) in [
            ("base_demand", self.base_demand),
            ("daily_amplitude", self.daily_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
            ("demand_noise_sd", self.demand_noise_sd),
            ("temperature_coupling", self.temperature_coupling),
            ("base_price", self.base_price),
            ("demand_coupling", self.demand_coupling),
            ("merit_order_discount", self.merit_order_discount),
            ("noise_sd", self.noise_sd),
            ("price_cap", self.price_cap),
            ("price_floor", self.price_floor),
        ] {
            check(v.is_finite(), &p(name), "must be finite")?;
        }
        for (name, v) in [
            ("daily_amplitude", self.daily_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
            ("demand_noise_sd", self.demand_noise_sd),
            ("noise_sd", self.noise_sd),
        ] {
            check(v >= 0.0, &p(name), "must be non-negative")?;
        }
        check(
            self.spike_scale.is_finite() && self.spike_scale > 0.0,
            &p("spike_scale"),
            "must be positive",
        )?;
        check(
            self.price_floor < self.price_cap,
            &p("price_floor"),
            "must be below price_cap",
        )?;
        check(
            (self.price_floor..=self.price_cap).contains(&self.base_price),
            &p("base_price"),
            "must lie within [price_floor, price_cap]",
        )?;
        Ok(())
    }
}

/// Normal draw that degenerates to the mean when `sd == 0`.
fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate("synth")?;
    let n = cfg.n_hours;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spike = Pareto::new(cfg.spike_scale, SPIKE_SHAPE)
        .map_err(|e| Error::config("synth.spike_scale", e.to_string()))?;

    let solar_capacity = 0.4 * cfg.base_demand;
    let wind_capacity = 0.3 * cfg.base_demand;

    let mut price = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    let mut interchange = Vec::with_capacity(n);
    let mut solar = Vec::with_capacity(n);
    let mut wind = Vec::with_capacity(n);
    let mut temperature = Vec::with_capacity(n);

    let mut temp_dev = 0.0;
    let mut cloud = 0.0;
    let mut wind_state = 0.0;
    let mut flow = 0.0;

    for t in 0..n {
        let hour = (t % 24) as f64;
        let tf = t as f64;

        temp_dev = 0.95 * temp_dev + gauss(&mut rng, 0.6);
        let temp = 20.0
            + 5.0 * (2.0 * PI * (hour - 9.0) / 24.0).sin()
            + 4.0 * (2.0 * PI * tf / 8760.0).cos()
            + temp_dev;

        let daily = (2.0 * PI * (hour - 13.0) / 24.0).cos();
        let weekly = (2.0 * PI * tf / 168.0).cos();
        let dem = cfg.base_demand
            + cfg.daily_amplitude * daily
            + cfg.weekly_amplitude * weekly
            + cfg.temperature_coupling * (temp - 18.0).abs()
            + gauss(&mut rng, cfg.demand_noise_sd);

        cloud = 0.9 * cloud + gauss(&mut rng, 0.3);
        let daylight = (PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let sol = solar_capacity * daylight * daylight * (0.3 + 0.7 * logistic(1.5 - cloud));

        wind_state = 0.97 * wind_state + gauss(&mut rng, 0.25);
        let wnd = wind_capacity * logistic(wind_state);

        flow = 0.9 * flow + gauss(&mut rng, 60.0);

        // Centred roughly on average output so the discount does not shift the mean price.
        let renewables = sol + wnd - (0.15 * solar_capacity + 0.5 * wind_capacity);
        let mut p = cfg.base_price + cfg.demand_coupling * (dem - cfg.base_demand)
            - cfg.merit_order_discount * renewables
            + gauss(&mut rng, cfg.noise_sd);
        if cfg.spike_prob > 0.0 && rng.random_bool(cfg.spike_prob) {
            p += spike.sample(&mut rng);
        }

        price.push(p.clamp(cfg.price_floor, cfg.price_cap));
        demand.push(dem);
        interchange.push(flow);
        solar.push(sol);
        wind.push(wnd);
        temperature.push(temp);
    }

    let mut exog = ExogenousSet::new();
    for (name, values) in [
        ("demand", demand),
        ("net_interchange", interchange),
        ("solar_forecast", solar),
        ("wind_forecast", wind),
        ("temperature", temperature),
    ] {
        exog.insert(name, TimeSeries::new(cfg.start, values)?)?;
    }
    Dataset::new(SYNTH_REGION, TimeSeries::new(cfg.start, price)?, exog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{read_csv, write_csv, Schema};

    fn acf(x: &[f64], lag: usize) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = (lag..n).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
        cov / var
    }

    #[test]
    fn drivers_off_gives_constant_price() {
        let cfg = SynthConfig {
            n_hours: 1000,
            daily_amplitude: 0.0,
            weekly_amplitude: 0.0,
            demand_coupling: 0.0,
            merit_order_discount: 0.0,
            spike_prob: 0.0,
            noise_sd: 0.0,
            ..SynthConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        assert!(ds.price().values().iter().all(|&p| p == cfg.base_price));
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = SynthConfig {
            n_hours: 2000,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig {
            seed: 7,
            ..cfg.clone()
        };
        assert_ne!(
            generate(&cfg).unwrap().price(),
            generate(&other).unwrap().price()
        );
    }

    #[test]
    fn daily_autocorrelation_dominates() {
        let ds = generate(&SynthConfig::default()).unwrap();
        let p = ds.price().values();
        let (a24, a13) = (acf(p, 24), acf(p, 13));
        assert!(a24 > a13, "acf24 {a24} acf13 {a13}");
        assert!(a24 > 0.3, "acf24 {a24}");
    }

    #[test]
    fn spikes_reach_the_tail() {
        for seed in [1, 42, 2024] {
            let cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            let ds = generate(&cfg).unwrap();
            let max = ds.price().values().iter().cloned().fold(f64::MIN, f64::max);
            assert!(max > cfg.base_price + 5.0 * cfg.noise_sd);
            assert!(max <= cfg.price_cap);
        }
    }

    #[test]
    fn series_are_finite_and_complete() {
        let ds = generate(&SynthConfig::default()).unwrap();
        assert_eq!(ds.len(), 8760);
        assert_eq!(ds.exog().len(), 5);
        assert!(ds
            .exog()
            .iter()
            .all(|(_, s)| s.values().iter().all(|v| v.is_finite())));
        assert!(ds
            .exog()
            .get("solar_forecast")
            .unwrap()
            .values()
            .iter()
            .all(|&v| v >= 0.0));
        assert!(ds
            .exog()
            .get("wind_forecast")
            .unwrap()
            .values()
            .iter()
            .all(|&v| v > 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SynthConfig {
            n_hours: 700,
            ..SynthConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &Schema::identity(), SYNTH_REGION).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let bad = SynthConfig {
            spike_prob: 1.5,
            ..SynthConfig::default()
        };
        match generate(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "synth.spike_prob"),
            other => panic!("{other:?}"),
        }
        let short = SynthConfig {
            n_hours: 10,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&short), Err(Error::Config { .. })));
    }
}
