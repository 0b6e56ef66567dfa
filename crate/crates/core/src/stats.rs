//! Role statistics of an interaction log and a synthetic log generator.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ingest::{clean_and_index, RawEvent, Role, RoleTable, TemporalEdgeList};
use crate::rng;
use crate::sampler::AliasTable;
use crate::tssn::MONTH_SECS;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("the edge list is empty")]
    Empty,
    #[error("need at least 2 {role}s, found {count}")]
    TooFewIndividuals { role: Role, count: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub mean_a: f64,
    pub mean_b: f64,
    /// `(mean_a - mean_b) / standard error`
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test. Both samples need at least two values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> WelchTest {
    assert!(a.len() >= 2 && b.len() >= 2, "each sample needs two values");
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        // Both samples are constant.
        let df = (a.len() + b.len() - 2) as f64;
        return if ma == mb {
            WelchTest {
                mean_a: ma,
                mean_b: mb,
                t: 0.0,
                df,
                p: 1.0,
            }
        } else {
            let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            WelchTest {
                mean_a: ma,
                mean_b: mb,
                t,
                df,
                p: 0.0,
            }
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    WelchTest {
        mean_a: ma,
        mean_b: mb,
        t,
        df,
        p,
    }
}

/// Users against developers on per-individual received and sent counts.
/// `mean_a`/`t` refer to users, so developers sending more gives `t < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleActivitySummary {
    pub users: usize,
    pub developers: usize,
    pub received: WelchTest,
    pub sent: WelchTest,
}

impl RoleActivitySummary {
    /// A tab-separated table with one row per count.
    pub fn render(&self) -> String {
        let mut out = String::from("\tUser\tDeveloper\tT-value\tSignificance\n");
        for (name, t) in [("# Emails received", &self.received), ("# Emails sent", &self.sent)] {
            let _ = writeln!(
                out,
                "{name}\t{:.4}\t{:.4}\t{:.4}\t{}",
                t.mean_a,
                t.mean_b,
                t.t,
                significance(t.p)
            );
        }
        out
    }
}

fn significance(p: f64) -> String {
    if p < 0.001 {
        "p<0.001".into()
    } else if p < 0.01 {
        "p<0.01".into()
    } else if p < 0.05 {
        "p<0.05".into()
    } else {
        format!("p={p:.3}")
    }
}

/// Counts per individual taking part in at least one event.
pub fn role_ttest(edges: &TemporalEdgeList, roles: &RoleTable) -> Result<RoleActivitySummary, StatsError> {
    if edges.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = edges.vertex_count();
    let (mut sent, mut received, mut active) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
    for e in edges.events() {
        sent[e.src as usize] += 1.0;
        received[e.dst as usize] += 1.0;
        active[e.src as usize] = true;
        active[e.dst as usize] = true;
    }
    let split = |counts: &[f64], role: Role| -> Vec<f64> {
        (0..n)
            .filter(|&v| active[v] && roles.role(v as u32) == role)
            .map(|v| counts[v])
            .collect()
    };
    let users = split(&sent, Role::User).len();
    let developers = split(&sent, Role::Developer).len();
    for (role, count) in [(Role::User, users), (Role::Developer, developers)] {
        if count < 2 {
            return Err(StatsError::TooFewIndividuals { role, count });
        }
    }
    Ok(RoleActivitySummary {
        users,
        developers,
        received: welch_t_test(&split(&received, Role::User), &split(&received, Role::Developer)),
        sent: welch_t_test(&split(&sent, Role::User), &split(&sent, Role::Developer)),
    })
}

/// Observed role mixing of events against uniform random pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendencyReport {
    pub user_fraction: f64,
    pub cross_real: f64,
    /// `2 p_u p_d`
    pub cross_expected: f64,
    /// `None` when only one role is present.
    pub cross_ratio: Option<f64>,
    pub same_real: f64,
    /// `p_u^2 + p_d^2`
    pub same_expected: f64,
    pub same_ratio: Option<f64>,
}

impl TendencyReport {
    pub fn render(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        format!(
            "kind\treal\trandom\tratio\nsame\t{:.4}\t{:.4}\t{}\ncross\t{:.4}\t{:.4}\t{}\n",
            self.same_real,
            self.same_expected,
            fmt(self.same_ratio),
            self.cross_real,
            self.cross_expected,
            fmt(self.cross_ratio)
        )
    }
}

/// Event-weighted proportions; role fractions are over individuals taking
/// part in at least one event.
pub fn tendency_ratio(edges: &TemporalEdgeList, roles: &RoleTable) -> Result<TendencyReport, StatsError> {
    if edges.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut active = vec![false; edges.vertex_count()];
    let mut cross = 0usize;
    for e in edges.events() {
        active[e.src as usize] = true;
        active[e.dst as usize] = true;
        if roles.role(e.src) != roles.role(e.dst) {
            cross += 1;
        }
    }
    let (mut users, mut total) = (0usize, 0usize);
    for (v, _) in active.iter().enumerate().filter(|(_, &a)| a) {
        total += 1;
        if roles.role(v as u32) == Role::User {
            users += 1;
        }
    }
    let pu = users as f64 / total as f64;
    let pd = 1.0 - pu;
    let cross_real = cross as f64 / edges.len() as f64;
    let same_real = 1.0 - cross_real;
    let cross_expected = 2.0 * pu * pd;
    let same_expected = pu * pu + pd * pd;
    let ratio = |real: f64, expected: f64| (expected > 0.0).then(|| real / expected);
    Ok(TendencyReport {
        user_fraction: pu,
        cross_real,
        cross_expected,
        cross_ratio: ratio(cross_real, cross_expected),
        same_real,
        same_expected,
        same_ratio: ratio(same_real, same_expected),
    })
}

/// Parameters of a synthetic role-labelled interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_developers: usize,
    pub snapshots: usize,
    pub events_per_snapshot: usize,
    /// Probability that an event joins a user and a developer.
    pub cross_role_affinity: f64,
    /// Activity of the individual ranked `i` is `(i + 1)^-skew`.
    pub activity_skew: f64,
    /// Activity multiplier of every developer.
    pub developer_activity: f64,
    /// Latent groups; individuals mostly talk within their own.
    pub communities: usize,
    /// Probability that an event stays inside the sender's group.
    pub community_affinity: f64,
    /// Probability that an individual switches group between snapshots.
    pub community_drift: f64,
    /// Seconds per snapshot.
    pub snapshot_span: u64,
    pub start: u64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 100,
            n_developers: 100,
            snapshots: 3,
            events_per_snapshot: 1000,
            cross_role_affinity: 0.5,
            activity_skew: 0.0,
            developer_activity: 1.0,
            communities: 2,
            community_affinity: 0.9,
            community_drift: 0.0,
            snapshot_span: MONTH_SECS,
            start: 1_500_000_000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: &str| Err(StatsError::InvalidSpec(m.to_string()));
        if self.n_users == 0 || self.n_developers == 0 || self.n_users + self.n_developers < 2 {
            return bad("need at least one user and one developer");
        }
        if self.snapshots == 0 || self.events_per_snapshot == 0 || self.snapshot_span == 0 {
            return bad("snapshots, events_per_snapshot and snapshot_span must be positive");
        }
        if self.communities == 0 {
            return bad("communities must be positive");
        }
        for (name, p) in [
            ("cross_role_affinity", self.cross_role_affinity),
            ("community_affinity", self.community_affinity),
            ("community_drift", self.community_drift),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(StatsError::InvalidSpec(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.activity_skew >= 0.0 && self.activity_skew.is_finite()) {
            return bad("activity_skew must be non-negative");
        }
        if !(self.developer_activity > 0.0 && self.developer_activity.is_finite()) {
            return bad("developer_activity must be positive");
        }
        Ok(())
    }
}

struct Pool {
    members: Vec<usize>,
    table: AliasTable,
}

impl Pool {
    fn new(members: Vec<usize>, activity: &[f64]) -> Option<Pool> {
        let weights: Vec<f64> = members.iter().map(|&m| activity[m]).collect();
        let table = AliasTable::from_weights(&weights).ok()?;
        Some(Pool { members, table })
    }

    /// A member other than `exclude`, when there is one.
    fn draw<R: Rng + ?Sized>(&self, exclude: usize, rng: &mut R) -> Option<usize> {
        if self.members.iter().all(|&m| m == exclude) {
            return None;
        }
        loop {
            let m = self.members[self.table.sample(rng)];
            if m != exclude {
                return Some(m);
            }
        }
    }
}

/// A generated log with the latent community of every individual in
/// every snapshot, keyed by vertex key.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub edges: TemporalEdgeList,
    pub roles: RoleTable,
    pub communities: Vec<HashMap<String, usize>>,
}

/// Draws a log snapshot by snapshot. Each event picks a sender by
/// activity, then a recipient of the opposite role with probability
/// `cross_role_affinity`, from the sender's current community with
/// probability `community_affinity`, again weighted by activity. Between
/// snapshots every individual changes community with probability
/// `community_drift`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TemporalEdgeList, RoleTable), StatsError> {
    generate_synthetic_log(spec).map(|log| (log.edges, log.roles))
}

pub fn generate_synthetic_log(spec: &SyntheticSpec) -> Result<SyntheticLog, StatsError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[]);
    let n = spec.n_users + spec.n_developers;
    let keys: Vec<String> = (0..spec.n_users)
        .map(|i| format!("u{i}"))
        .chain((0..spec.n_developers).map(|i| format!("d{i}")))
        .collect();
    let role_of = |i: usize| if i < spec.n_users { Role::User } else { Role::Developer };
    let slot = |role: Role| usize::from(role == Role::Developer);

    let mut community = vec![0usize; n];
    for (lo, hi) in [(0, spec.n_users), (spec.n_users, n)] {
        let mut members: Vec<usize> = (lo..hi).collect();
        members.shuffle(&mut rng);
        for (k, m) in members.into_iter().enumerate() {
            community[m] = k % spec.communities;
        }
    }
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let activity: Vec<f64> = rank
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let boost = if role_of(i) == Role::Developer {
                spec.developer_activity
            } else {
                1.0
            };
            boost * ((r + 1) as f64).powf(-spec.activity_skew)
        })
        .collect();

    let everyone = Pool::new((0..n).collect(), &activity).expect("positive activity");
    let role_pool = |role: Role| Pool::new((0..n).filter(|&i| role_of(i) == role).collect(), &activity);
    let by_role = [role_pool(Role::User), role_pool(Role::Developer)];
    let other_group = |rng: &mut rng::StreamRng, own: usize| {
        let other = rng.gen_range(0..spec.communities - 1);
        if other >= own {
            other + 1
        } else {
            other
        }
    };

    let mut raw = Vec::with_capacity(spec.snapshots * spec.events_per_snapshot);
    let mut history = Vec::with_capacity(spec.snapshots);
    for t in 0..spec.snapshots as u64 {
        if t > 0 && spec.communities > 1 {
            for c in community.iter_mut() {
                if rng.gen_bool(spec.community_drift) {
                    *c = other_group(&mut rng, *c);
                }
            }
        }
        history.push(keys.iter().cloned().zip(community.iter().copied()).collect());
        let by_group: Vec<[Option<Pool>; 2]> = (0..spec.communities)
            .map(|c| {
                [Role::User, Role::Developer].map(|role| {
                    Pool::new(
                        (0..n).filter(|&i| role_of(i) == role && community[i] == c).collect(),
                        &activity,
                    )
                })
            })
            .collect();
        for _ in 0..spec.events_per_snapshot {
            let sender = everyone.members[everyone.table.sample(&mut rng)];
            let own = role_of(sender);
            let role = if rng.gen_bool(spec.cross_role_affinity) {
                match own {
                    Role::User => Role::Developer,
                    Role::Developer => Role::User,
                }
            } else {
                own
            };
            let group = if spec.communities == 1 || rng.gen_bool(spec.community_affinity) {
                community[sender]
            } else {
                other_group(&mut rng, community[sender])
            };
            let recipient = by_group[group][slot(role)]
                .as_ref()
                .and_then(|p| p.draw(sender, &mut rng))
                .or_else(|| by_role[slot(role)].as_ref().and_then(|p| p.draw(sender, &mut rng)))
                .or_else(|| everyone.draw(sender, &mut rng))
                .expect("at least two individuals");
            let ts = spec.start + t * spec.snapshot_span + rng.gen_range(0..spec.snapshot_span);
            raw.push(RawEvent::new(keys[sender].clone(), keys[recipient].clone(), ts));
        }
    }
    let roles: HashMap<String, Role> = keys.iter().enumerate().map(|(i, k)| (k.clone(), role_of(i))).collect();
    let (edges, roles) = clean_and_index(raw, &roles).expect("every generated key has a role");
    Ok(SyntheticLog {
        edges,
        roles,
        communities: history,
    })
}
