//! Random scenarios: the experiment inventories with random workloads, power
//! states, switch times and migration times.
//!
//! Every run draws from its own ChaCha8 stream: the generator is seeded with
//! `seed` and the stream number is the run index, so a run can be regenerated
//! alone. Normal variates come from `rand_distr::Normal` (ziggurat method);
//! values below zero are redrawn up to 100 times and then clamped to zero.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fixtures;
use crate::domain::{Host, MigrationParams, Provider, Scenario, Vm, DEFAULT_PLANNING_PERIOD_HOURS};
use crate::error::{Error, Result};

const REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Host counts per class for every provider.
    pub providers: Vec<[u32; 3]>,
    /// Inclusive range of VMs per class and provider.
    pub vm_count_range: [u32; 2],
    /// Probability that a host starts powered on.
    pub power_state_prob: f64,
    pub switch_time_mean_s: f64,
    pub switch_time_sd_s: f64,
    pub migration_time_mean_s: [f64; 3],
    pub migration_time_sd_s: [f64; 3],
    pub data_rate_mbit_s: f64,
    pub transfer_cost_per_gb: f64,
    pub energy_price_per_kwh: f64,
    pub revenue_rates: [f64; 3],
    pub planning_period_hours: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            providers: fixtures::EXPERIMENT_HOSTS.to_vec(),
            vm_count_range: [0, 20],
            power_state_prob: 0.5,
            switch_time_mean_s: 300e-6,
            switch_time_sd_s: 50e-6,
            migration_time_mean_s: fixtures::MEAN_MIGRATION_TIME_S,
            migration_time_sd_s: [182.0, 364.0, 728.0],
            data_rate_mbit_s: fixtures::DATA_RATE_MBIT_S,
            transfer_cost_per_gb: fixtures::TRANSFER_COST_PER_GB,
            energy_price_per_kwh: 0.4,
            revenue_rates: [0.08, 0.16, 0.32],
            planning_period_hours: DEFAULT_PLANNING_PERIOD_HOURS,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.providers.is_empty() {
            return bad("generator needs at least one provider".into());
        }
        if self.vm_count_range[0] > self.vm_count_range[1] {
            return bad(format!("empty VM count range {:?}", self.vm_count_range));
        }
        if !(0.0..=1.0).contains(&self.power_state_prob) {
            return bad(format!(
                "power state probability {} outside [0, 1]",
                self.power_state_prob
            ));
        }
        let sds = [self.switch_time_sd_s]
            .into_iter()
            .chain(self.migration_time_sd_s);
        let means = [self.switch_time_mean_s]
            .into_iter()
            .chain(self.migration_time_mean_s);
        if sds.chain(means).any(|x| !x.is_finite() || x < 0.0) {
            return bad("time distributions need finite, nonnegative mean and sd".into());
        }
        let positive = [
            self.data_rate_mbit_s,
            self.transfer_cost_per_gb,
            self.energy_price_per_kwh,
            self.planning_period_hours,
        ];
        if positive.iter().any(|&x| !x.is_finite() || x < 0.0) || self.planning_period_hours == 0.0 {
            return bad("rates, prices and planning period must be nonnegative".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: GeneratorConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Normal draw truncated at zero.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(0.0);
    }
    let d = Normal::new(mean, sd).expect("sd checked by validate");
    for _ in 0..REDRAWS {
        let x = d.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
    0.0
}

/// Generator positioned at the start of a run's stream.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Draw order: VM counts (provider, class), host power states (host id
/// order), switch time per host class, migration time per VM class.
pub fn generate_scenario(config: &GeneratorConfig, run_index: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = run_rng(config.seed, run_index);
    let [lo, hi] = config.vm_count_range;
    let vm_counts: Vec<[u32; 3]> = config
        .providers
        .iter()
        .map(|_| std::array::from_fn(|_| rng.random_range(lo..=hi)))
        .collect();
    let mut s = fixtures::from_counts(&config.providers, &vm_counts);
    for p in &mut s.providers {
        p.energy_price = config.energy_price_per_kwh / 1000.0;
        for h in &mut p.hosts {
            h.initially_on = rng.random_bool(config.power_state_prob);
        }
    }
    for c in &mut s.host_classes {
        let t = truncated_normal(&mut rng, config.switch_time_mean_s, config.switch_time_sd_s);
        let e = fixtures::switch_energy_wh(c, t);
        c.switch_energy_on = e;
        c.switch_energy_off = e;
    }
    for (c, &r) in s.vm_classes.iter_mut().zip(&config.revenue_rates) {
        c.revenue_rate = r;
    }
    let times = (0..3)
        .map(|q| {
            truncated_normal(
                &mut rng,
                config.migration_time_mean_s[q],
                config.migration_time_sd_s[q],
            )
        })
        .collect();
    s.migration = MigrationParams {
        transfer_cost_per_gb: config.transfer_cost_per_gb,
        data_rate_mbit_s: config.data_rate_mbit_s,
        migration_time_s: times,
        same_cp_cost: 0.0,
    };
    s.planning_period_hours = config.planning_period_hours;
    for p in &mut s.providers {
        place_on_running_hosts(p);
    }
    Ok(s)
}

/// Current placement: round-robin over the provider's powered-on hosts, or
/// over all its hosts if none is on.
fn place_on_running_hosts(p: &mut Provider) {
    let on: Vec<&Host> = p.hosts.iter().filter(|h| h.initially_on).collect();
    let pool: Vec<u32> = if on.is_empty() {
        p.hosts.iter().map(|h| h.id).collect()
    } else {
        on.iter().map(|h| h.id).collect()
    };
    if pool.is_empty() {
        return;
    }
    for (k, vm) in p.workload.iter_mut().enumerate() {
        vm.current_host = Some(pool[k % pool.len()]);
    }
}

/// VM counts per class of one provider, in class order.
pub fn workload_counts(p: &Provider) -> [u32; 3] {
    let mut out = [0; 3];
    for Vm { class, .. } in &p.workload {
        out[(*class as usize - 1).min(2)] += 1;
    }
    out
}
