//! Scenario generation, the LBS provider model, multi-round simulation,
//! parameter sweeps, and timing probes.
//!
//! Users are static across rounds: the scheme is evaluated per query, and
//! only the obfuscation draws are refreshed each round. The group is the
//! whole scenario population on a single-hop full mesh, so the group size is
//! exactly the k of the provider-side k-anonymity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{distance, Point2D};
use crate::metrics::{
    self, energy, overhead, provider_view_entropy, uniform_entropy, EnergyConfig, MetricsReport,
};
use crate::protocol::{
    run_round, LbsQuery, LbsResponse, PrivacyLevel, RoundConfig, RoundOutcome, ServiceTag, User,
    UserId, PROVIDER_ID,
};

// The wire types the provider model is built from live with the protocol;
// re-export them here where scenario construction picks them up.
pub use crate::protocol::{LbsProvider, NoiseConfig, PoiRecord};

/// Default serving radius, metres (250 m diameter coverage per query).
pub const DEFAULT_SERVING_RADIUS: f64 = 125.0;
/// Default per-user interest radius, metres. Matches the serving radius so
/// a user sitting exactly at the final location scores 100%.
pub const DEFAULT_INTEREST_RADIUS: f64 = 125.0;

/// Axis-aligned rectangular deployment region with origin (0, 0), metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.is_finite() && (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// The LBS provider: a POI database answered over a fixed serving radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderModel {
    pub pois: Vec<PoiRecord>,
    pub serving_radius: f64,
}

impl ProviderModel {
    pub fn new(pois: Vec<PoiRecord>, serving_radius: f64) -> Self {
        Self {
            pois,
            serving_radius,
        }
    }
}

impl LbsProvider for ProviderModel {
    /// All POIs matching the requested service within the serving radius of
    /// the query point, ordered by ascending distance, ties by id. The
    /// canonical ordering makes forwarded payloads byte-comparable.
    fn serve_query(&self, query: &LbsQuery) -> LbsResponse {
        let mut hits: Vec<(f64, &PoiRecord)> = self
            .pois
            .iter()
            .filter(|poi| poi.category == query.service)
            .map(|poi| (distance(poi.position, query.query_position), poi))
            .filter(|&(d, _)| d <= self.serving_radius)
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
        LbsResponse {
            provider: PROVIDER_ID,
            qu: query.qu,
            payload: hits.into_iter().map(|(_, poi)| poi.clone()).collect(),
        }
    }
}

/// How privacy requirements are assigned when generating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum PrivacyDistribution {
    /// Independent uniform draws from [0, 1).
    Uniform,
    /// Every user gets the same requirement.
    Fixed(f64),
    /// One value per user, in id order; length must equal `n_users`.
    Explicit(Vec<f64>),
}

/// Generator parameters for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub region: Region,
    pub n_users: usize,
    pub n_pois: usize,
    pub privacy: PrivacyDistribution,
    pub seed: u64,
    pub rounds: usize,
    pub noise: NoiseConfig,
    pub service: ServiceTag,
    pub interest_radius: f64,
    pub serving_radius: f64,
    pub energy: EnergyConfig,
}

impl ScenarioParams {
    /// Parameters with every default filled in: 1000 m x 1000 m region, 100
    /// POIs, uniform privacy, 10 rounds, default noise/energy, 125 m radii,
    /// service "restaurant".
    pub fn new(n_users: usize, seed: u64) -> Self {
        Self {
            region: Region::new(1000.0, 1000.0),
            n_users,
            n_pois: 100,
            privacy: PrivacyDistribution::Uniform,
            seed,
            rounds: 10,
            noise: NoiseConfig::default(),
            service: ServiceTag("restaurant".to_string()),
            interest_radius: DEFAULT_INTEREST_RADIUS,
            serving_radius: DEFAULT_SERVING_RADIUS,
            energy: EnergyConfig::default(),
        }
    }
}

/// A fully materialised simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub region: Region,
    pub users: Vec<User>,
    pub provider: ProviderModel,
    pub seed: u64,
    pub rounds: usize,
    pub noise: NoiseConfig,
    pub service: ServiceTag,
    pub energy: EnergyConfig,
}

/// Per-round outcomes plus the aggregate metrics of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub per_round: Vec<(RoundOutcome, MetricsReport)>,
    pub aggregate: MetricsReport,
}

/// Errors from scenario generation and simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    BadScenarioParams {
        field: &'static str,
        message: String,
    },
    Protocol(crate::protocol::ProtocolError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::BadScenarioParams { field, message } => {
                write!(f, "bad scenario parameter `{field}`: {message}")
            }
            SimError::Protocol(e) => write!(f, "protocol error: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<crate::protocol::ProtocolError> for SimError {
    fn from(e: crate::protocol::ProtocolError) -> Self {
        SimError::Protocol(e)
    }
}

fn bad_params(field: &'static str, message: impl fmt::Display) -> SimError {
    SimError::BadScenarioParams {
        field,
        message: message.to_string(),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

const DOMAIN_PLACEMENT: u64 = 1;
const DOMAIN_ROUND: u64 = 2;
const DOMAIN_SWEEP: u64 = 3;

/// Seeds for distinct purposes of one base seed. Injective in `index` for a
/// fixed `(base, domain)`, which keeps derived sweep and round seeds
/// pairwise distinct.
fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    splitmix64(
        base ^ splitmix64(
            domain
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(index),
        ),
    )
}

fn validate_params(params: &ScenarioParams) -> Result<(), SimError> {
    if params.n_users < 1 {
        return Err(bad_params("n_users", "must be at least 1"));
    }
    if !(params.region.width.is_finite() && params.region.width > 0.0) {
        return Err(bad_params("region.width", "must be positive"));
    }
    if !(params.region.height.is_finite() && params.region.height > 0.0) {
        return Err(bad_params("region.height", "must be positive"));
    }
    if params.noise.validate().is_err() {
        return Err(bad_params(
            "noise",
            "requires 0 <= rho_min <= rho_max, both finite",
        ));
    }
    if !(params.interest_radius.is_finite() && params.interest_radius > 0.0) {
        return Err(bad_params("interest_radius", "must be positive"));
    }
    if !(params.serving_radius.is_finite() && params.serving_radius > 0.0) {
        return Err(bad_params("serving_radius", "must be positive"));
    }
    if !params.energy.is_valid() {
        return Err(bad_params("energy", "per-message energies must be >= 0"));
    }
    if params.service.0.is_empty() {
        return Err(bad_params("service", "must be nonempty"));
    }
    match &params.privacy {
        PrivacyDistribution::Uniform => {}
        PrivacyDistribution::Fixed(p) => {
            PrivacyLevel::new(*p).map_err(|e| bad_params("privacy", e))?;
        }
        PrivacyDistribution::Explicit(values) => {
            if values.len() != params.n_users {
                return Err(bad_params(
                    "privacy",
                    "explicit list length must equal n_users",
                ));
            }
            for &p in values {
                PrivacyLevel::new(p).map_err(|e| bad_params("privacy", e))?;
            }
        }
    }
    Ok(())
}

/// Builds a scenario from generator parameters: users placed independently
/// uniformly in the region, privacy levels from the configured distribution,
/// POIs uniform in the region, all fully determined by the seed.
///
/// User ids run from 1 (0 is the reserved provider id).
pub fn generate_scenario(params: &ScenarioParams) -> Result<Scenario, SimError> {
    validate_params(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, DOMAIN_PLACEMENT, 0));

    let mut users = Vec::with_capacity(params.n_users);
    for i in 0..params.n_users {
        let position = Point2D::new(
            rng.random::<f64>() * params.region.width,
            rng.random::<f64>() * params.region.height,
        );
        let p = match &params.privacy {
            PrivacyDistribution::Uniform => rng.random::<f64>(),
            PrivacyDistribution::Fixed(p) => *p,
            PrivacyDistribution::Explicit(values) => values[i],
        };
        users.push(User {
            id: UserId(i as u64 + 1),
            true_position: position,
            privacy: PrivacyLevel::new(p).expect("validated above"),
            interest_radius: params.interest_radius,
        });
    }

    let mut pois = Vec::with_capacity(params.n_pois);
    for i in 0..params.n_pois {
        pois.push(PoiRecord {
            id: i as u64 + 1,
            position: Point2D::new(
                rng.random::<f64>() * params.region.width,
                rng.random::<f64>() * params.region.height,
            ),
            category: params.service.clone(),
        });
    }

    Ok(Scenario {
        region: params.region,
        users,
        provider: ProviderModel::new(pois, params.serving_radius),
        seed: params.seed,
        rounds: params.rounds,
        noise: params.noise,
        service: params.service.clone(),
        energy: params.energy,
    })
}

impl Scenario {
    /// Checks the scenario invariants: distinct user ids, everything inside
    /// the region, positive radii, valid noise and energy parameters.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.users.is_empty() {
            return Err(bad_params("users", "must be nonempty"));
        }
        let mut seen = BTreeSet::new();
        for u in &self.users {
            if !seen.insert(u.id) {
                return Err(bad_params("users", "ids must be distinct"));
            }
            if !self.region.contains(u.true_position) {
                return Err(bad_params("users", "positions must lie in the region"));
            }
            if !(u.interest_radius.is_finite() && u.interest_radius > 0.0) {
                return Err(bad_params("users", "interest radii must be positive"));
            }
        }
        for poi in &self.provider.pois {
            if !self.region.contains(poi.position) {
                return Err(bad_params("pois", "positions must lie in the region"));
            }
        }
        if !(self.provider.serving_radius.is_finite() && self.provider.serving_radius > 0.0) {
            return Err(bad_params("serving_radius", "must be positive"));
        }
        self.noise
            .validate()
            .map_err(|_| bad_params("noise", "requires 0 <= rho_min <= rho_max"))?;
        if !self.energy.is_valid() {
            return Err(bad_params("energy", "per-message energies must be >= 0"));
        }
        if self.service.0.is_empty() {
            return Err(bad_params("service", "must be nonempty"));
        }
        Ok(())
    }
}

/// Recall of the round payload against the POIs actually inside the user's
/// interest circle, percent. An empty reference set counts as 100 (there was
/// nothing to miss).
pub fn empirical_accuracy(user: &User, payload: &[PoiRecord], ground_truth: &ProviderModel) -> f64 {
    let in_interest: BTreeSet<u64> = ground_truth
        .pois
        .iter()
        .filter(|poi| distance(poi.position, user.true_position) <= user.interest_radius)
        .map(|poi| poi.id)
        .collect();
    if in_interest.is_empty() {
        return 100.0;
    }
    let delivered = payload
        .iter()
        .filter(|poi| in_interest.contains(&poi.id))
        .count();
    100.0 * delivered as f64 / in_interest.len() as f64
}

fn round_metrics(scenario: &Scenario, outcome: &RoundOutcome) -> MetricsReport {
    let n = scenario.users.len();
    let per_user_accuracy: BTreeMap<UserId, f64> = scenario
        .users
        .iter()
        .map(|u| {
            (
                u.id,
                metrics::service_accuracy(
                    u,
                    outcome.final_location,
                    scenario.provider.serving_radius,
                ),
            )
        })
        .collect();
    let accuracy_mean = per_user_accuracy.values().sum::<f64>() / n as f64;
    let accuracy_min = per_user_accuracy
        .values()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let counts = overhead(outcome);
    MetricsReport {
        entropy_from_peers: uniform_entropy(n).expect("n >= 1"),
        entropy_from_provider: provider_view_entropy(n),
        per_user_accuracy,
        accuracy_mean,
        accuracy_min,
        sends: counts.sends,
        receives: counts.receives,
        bytes: counts.bytes,
        energy: energy(&counts, &scenario.energy),
        timing_samples: Vec::new(),
    }
}

fn aggregate_metrics(reports: &[MetricsReport]) -> MetricsReport {
    if reports.is_empty() {
        return MetricsReport::default();
    }
    let n_rounds = reports.len() as f64;
    let mut aggregate = MetricsReport::default();
    let mut accuracy_sums: BTreeMap<UserId, f64> = BTreeMap::new();
    for report in reports {
        aggregate.entropy_from_peers += report.entropy_from_peers;
        aggregate.entropy_from_provider += report.entropy_from_provider;
        aggregate.sends += report.sends;
        aggregate.receives += report.receives;
        aggregate.bytes += report.bytes;
        aggregate.energy += report.energy;
        for (&id, &acc) in &report.per_user_accuracy {
            *accuracy_sums.entry(id).or_insert(0.0) += acc;
        }
    }
    aggregate.entropy_from_peers /= n_rounds;
    aggregate.entropy_from_provider /= n_rounds;
    aggregate.per_user_accuracy = accuracy_sums
        .into_iter()
        .map(|(id, sum)| (id, sum / n_rounds))
        .collect();
    if !aggregate.per_user_accuracy.is_empty() {
        aggregate.accuracy_mean = aggregate.per_user_accuracy.values().sum::<f64>()
            / aggregate.per_user_accuracy.len() as f64;
        aggregate.accuracy_min = aggregate
            .per_user_accuracy
            .values()
            .copied()
            .fold(f64::INFINITY, f64::min);
    }
    aggregate
}

/// Runs `scenario.rounds` independent protocol rounds (fresh obfuscation
/// draws each round, fixed user positions) and computes per-round and
/// aggregate metrics. A pure function of the scenario: identical inputs give
/// identical results.
pub fn run_simulation(scenario: &Scenario) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let config = RoundConfig {
        noise: scenario.noise,
        service: scenario.service.clone(),
    };
    let mut per_round = Vec::with_capacity(scenario.rounds);
    for round in 0..scenario.rounds {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, DOMAIN_ROUND, round as u64));
        let outcome = run_round(&scenario.users, &scenario.provider, &config, &mut rng)?;
        let report = round_metrics(scenario, &outcome);
        per_round.push((outcome, report));
    }
    let aggregate = aggregate_metrics(
        &per_round
            .iter()
            .map(|(_, report)| report.clone())
            .collect::<Vec<_>>(),
    );
    Ok(SimulationResult {
        per_round,
        aggregate,
    })
}

/// One parameter override applied at a sweep grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepSetting {
    NUsers(usize),
    RhoMax(f64),
    ServingRadius(f64),
    Privacy(PrivacyDistribution),
}

impl SweepSetting {
    pub fn key(&self) -> &'static str {
        match self {
            SweepSetting::NUsers(_) => "n_users",
            SweepSetting::RhoMax(_) => "rho_max",
            SweepSetting::ServingRadius(_) => "serving_radius",
            SweepSetting::Privacy(_) => "privacy_distribution",
        }
    }

    fn apply(&self, params: &mut ScenarioParams) {
        match self {
            SweepSetting::NUsers(n) => params.n_users = *n,
            SweepSetting::RhoMax(rho) => params.noise.rho_max = *rho,
            SweepSetting::ServingRadius(r) => params.serving_radius = *r,
            SweepSetting::Privacy(d) => params.privacy = d.clone(),
        }
    }
}

/// One axis of a sweep grid: the settings tried for a single parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub settings: Vec<SweepSetting>,
}

/// The result of one sweep grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Row-major grid index (last axis fastest).
    pub index: usize,
    /// The derived seed this point ran with.
    pub seed: u64,
    pub settings: Vec<SweepSetting>,
    pub aggregate: MetricsReport,
}

/// Runs one simulation per grid point of the cartesian product of `axes`,
/// applied over `base`. Each point's seed derives deterministically from the
/// base seed and the grid index, so points are reproducible in isolation and
/// pairwise seed-distinct.
pub fn sweep(base: &ScenarioParams, axes: &[SweepAxis]) -> Result<Vec<SweepRow>, SimError> {
    if axes.is_empty() || axes.iter().any(|axis| axis.settings.is_empty()) {
        return Err(bad_params("vary", "sweep grid must be nonempty"));
    }
    let total: usize = axes.iter().map(|axis| axis.settings.len()).product();
    let mut rows = Vec::with_capacity(total);
    for index in 0..total {
        // Decode the row-major index into one setting per axis.
        let mut remainder = index;
        let mut settings = Vec::with_capacity(axes.len());
        for axis in axes.iter().rev() {
            let k = axis.settings.len();
            settings.push(axis.settings[remainder % k].clone());
            remainder /= k;
        }
        settings.reverse();

        let mut params = base.clone();
        for setting in &settings {
            setting.apply(&mut params);
        }
        params.seed = derive_seed(base.seed, DOMAIN_SWEEP, index as u64);
        let scenario = generate_scenario(&params)?;
        let result = run_simulation(&scenario)?;
        rows.push(SweepRow {
            index,
            seed: params.seed,
            settings,
            aggregate: result.aggregate,
        });
    }
    Ok(rows)
}

/// Measures the median wall time of the final-location computation over `n`
/// synthetic points for each `n` in `sizes`.
///
/// [`final_location`] is the coordinate mean of the broadcast positions;
/// the probe times that kernel over packed points so the measurement tracks
/// the O(n) algorithm rather than message-struct stride (the equality of
/// `final_location` and the centroid is pinned by the protocol tests).
///
/// Run this without concurrent load; the medians feed the linearity
/// diagnostics. Panics if `sizes` is empty or `repetitions < 3`.
#[cfg(feature = "std")]
pub fn timing_probe(sizes: &[usize], repetitions: usize) -> Vec<(usize, core::time::Duration)> {
    assert!(!sizes.is_empty(), "sizes must be nonempty");
    assert!(repetitions >= 3, "need at least 3 repetitions");
    sizes
        .iter()
        .map(|&n| {
            assert!(n >= 1, "probe sizes must be >= 1");
            let points = synthetic_points(n);
            let mut samples: Vec<core::time::Duration> = (0..repetitions)
                .map(|_| {
                    let start = std::time::Instant::now();
                    let point = crate::geometry::centroid(&points).expect("nonempty");
                    let elapsed = start.elapsed();
                    core::hint::black_box(point);
                    elapsed
                })
                .collect();
            samples.sort_unstable();
            (n, samples[samples.len() / 2])
        })
        .collect()
}

#[cfg(feature = "std")]
fn synthetic_points(n: usize) -> Vec<Point2D> {
    (0..n)
        .map(|i| {
            let a = splitmix64(i as u64);
            let b = splitmix64(a);
            Point2D::new(
                (a % 1_000_000) as f64 / 1000.0,
                (b % 1_000_000) as f64 / 1000.0,
            )
        })
        .collect()
}
