use serde::{Deserialize, Serialize};

use super::{ModelError, PowerModel, ShiftCostModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdcSpec {
    /// Upper bound on active servers in any slot.
    pub k_max: f64,
}

/// A delay-tolerant job class with its own backlog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub origin: usize,
    /// IDCs able to serve this class, ascending.
    pub serving_set: Vec<usize>,
    /// Traffic served per capacity unit at each IDC of `serving_set`.
    pub rates: Vec<f64>,
    /// Mean arrivals per slot.
    pub mean_rate: f64,
    /// Bound on arrivals in any single slot.
    pub arrival_bound: f64,
}

/// One decision variable `S_ij`: capacity of IDC `idc` given to job `job`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarSlot {
    pub job: usize,
    pub idc: usize,
    pub rate: f64,
    /// Index of the ordered link `(origin, idc)` when the job is shifted.
    pub link: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct Topology {
    idcs: Vec<IdcSpec>,
    jobs: Vec<JobClass>,
    power: PowerModel,
    link_costs: Vec<ShiftCostModel>,
    vars: Vec<VarSlot>,
    job_vars: Vec<std::ops::Range<usize>>,
    idc_vars: Vec<Vec<usize>>,
    link_vars: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyRepr {
    idcs: Vec<IdcSpec>,
    jobs: Vec<JobClass>,
    #[serde(default)]
    power: PowerModel,
    /// Either one model for every link or a full row-major `N x N` table.
    #[serde(default)]
    link_costs: LinkCosts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LinkCosts {
    Uniform(ShiftCostModel),
    PerLink(Vec<ShiftCostModel>),
}

impl Default for LinkCosts {
    fn default() -> Self {
        LinkCosts::Uniform(ShiftCostModel::default())
    }
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = ModelError;
    fn try_from(r: TopologyRepr) -> Result<Self, ModelError> {
        let n = r.idcs.len();
        let costs = match r.link_costs {
            LinkCosts::Uniform(m) => vec![m; n * n],
            LinkCosts::PerLink(v) => v,
        };
        Topology::new(r.idcs, r.jobs, r.power, costs)
    }
}

impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        let uniform = t.link_costs.windows(2).all(|w| w[0] == w[1]);
        let link_costs = match (uniform, t.link_costs.first()) {
            (true, Some(m)) => LinkCosts::Uniform(m.clone()),
            _ => LinkCosts::PerLink(t.link_costs),
        };
        TopologyRepr {
            idcs: t.idcs,
            jobs: t.jobs,
            power: t.power,
            link_costs,
        }
    }
}

impl Topology {
    /// `link_costs` is row-major over ordered pairs `(from, to)`; diagonal
    /// entries are ignored.
    pub fn new(
        idcs: Vec<IdcSpec>,
        mut jobs: Vec<JobClass>,
        power: PowerModel,
        link_costs: Vec<ShiftCostModel>,
    ) -> Result<Self, ModelError> {
        power.validate()?;
        let n = idcs.len();
        if n == 0 {
            return Err(ModelError::Invalid("topology: no IDCs".into()));
        }
        for (i, idc) in idcs.iter().enumerate() {
            if !(idc.k_max.is_finite() && idc.k_max > 0.0) {
                return Err(ModelError::Invalid(format!("IDC {i}: k_max must be > 0")));
            }
        }
        if link_costs.len() != n * n {
            return Err(ModelError::Dimension {
                what: "link cost table",
                expected: n * n,
                got: link_costs.len(),
            });
        }
        for (j, job) in jobs.iter_mut().enumerate() {
            if job.origin >= n {
                return Err(ModelError::Invalid(format!("job {j}: origin {} out of range", job.origin)));
            }
            if job.serving_set.is_empty() {
                return Err(ModelError::Invalid(format!("job {j}: empty serving set")));
            }
            if job.rates.len() != job.serving_set.len() {
                return Err(ModelError::Dimension {
                    what: "job service rates",
                    expected: job.serving_set.len(),
                    got: job.rates.len(),
                });
            }
            let mut pairs: Vec<(usize, f64)> = job
                .serving_set
                .iter()
                .copied()
                .zip(job.rates.iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(ModelError::Invalid(format!("job {j}: duplicate serving IDC")));
            }
            for &(i, r) in &pairs {
                if i >= n {
                    return Err(ModelError::Invalid(format!("job {j}: serving IDC {i} out of range")));
                }
                if !(r.is_finite() && r > 0.0) {
                    return Err(ModelError::Invalid(format!("job {j}: rate at IDC {i} must be > 0")));
                }
            }
            job.serving_set = pairs.iter().map(|p| p.0).collect();
            job.rates = pairs.iter().map(|p| p.1).collect();
            if !(job.mean_rate.is_finite() && job.mean_rate >= 0.0 && job.mean_rate <= job.arrival_bound) {
                return Err(ModelError::Invalid(format!(
                    "job {j}: need 0 <= mean_rate <= arrival_bound (got {} and {})",
                    job.mean_rate, job.arrival_bound
                )));
            }
        }

        let mut vars = Vec::new();
        let mut job_vars = Vec::with_capacity(jobs.len());
        let mut idc_vars = vec![Vec::new(); n];
        let mut link_vars = vec![Vec::new(); n * n];
        for (j, job) in jobs.iter().enumerate() {
            let start = vars.len();
            for (&i, &rate) in job.serving_set.iter().zip(&job.rates) {
                let k = vars.len();
                let link = (i != job.origin).then_some(job.origin * n + i);
                if let Some(l) = link {
                    link_vars[l].push(k);
                }
                idc_vars[i].push(k);
                vars.push(VarSlot { job: j, idc: i, rate, link });
            }
            job_vars.push(start..vars.len());
        }
        Ok(Self {
            idcs,
            jobs,
            power,
            link_costs,
            vars,
            job_vars,
            idc_vars,
            link_vars,
        })
    }

    /// Same shift cost on every link.
    pub fn with_uniform_links(
        idcs: Vec<IdcSpec>,
        jobs: Vec<JobClass>,
        power: PowerModel,
        cost: ShiftCostModel,
    ) -> Result<Self, ModelError> {
        let n = idcs.len();
        Self::new(idcs, jobs, power, vec![cost; n * n])
    }

    pub fn n_idcs(&self) -> usize {
        self.idcs.len()
    }

    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn idcs(&self) -> &[IdcSpec] {
        &self.idcs
    }

    pub fn jobs(&self) -> &[JobClass] {
        &self.jobs
    }

    pub fn power(&self) -> &PowerModel {
        &self.power
    }

    pub fn vars(&self) -> &[VarSlot] {
        &self.vars
    }

    /// Variables of job `j`, ordered like its serving set.
    pub fn job_vars(&self, j: usize) -> std::ops::Range<usize> {
        self.job_vars[j].clone()
    }

    /// Variables hosted at IDC `i` (the classes in `Π_i`).
    pub fn idc_vars(&self, i: usize) -> &[usize] {
        &self.idc_vars[i]
    }

    pub fn link_index(&self, from: usize, to: usize) -> usize {
        from * self.n_idcs() + to
    }

    pub fn link_endpoints(&self, link: usize) -> (usize, usize) {
        (link / self.n_idcs(), link % self.n_idcs())
    }

    /// Variables whose traffic crosses `from -> to` (the classes in `Υ`).
    pub fn link_vars(&self, from: usize, to: usize) -> &[usize] {
        &self.link_vars[self.link_index(from, to)]
    }

    pub fn link_vars_by_index(&self, link: usize) -> &[usize] {
        &self.link_vars[link]
    }

    pub fn link_cost(&self, from: usize, to: usize) -> &ShiftCostModel {
        &self.link_costs[self.link_index(from, to)]
    }

    pub fn link_cost_by_index(&self, link: usize) -> &ShiftCostModel {
        &self.link_costs[link]
    }

    /// Classes that IDC `i` can serve.
    pub fn served_at(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.idc_vars[i].iter().map(|&k| self.vars[k].job)
    }

    /// Classes originating at `from` that `to` can serve.
    pub fn shiftable(&self, from: usize, to: usize) -> impl Iterator<Item = usize> + '_ {
        self.link_vars(from, to).iter().map(|&k| self.vars[k].job)
    }

    pub fn var_index(&self, idc: usize, job: usize) -> Option<usize> {
        self.job_vars[job]
            .clone()
            .find(|&k| self.vars[k].idc == idc)
    }

    pub fn mean_rates(&self) -> Vec<f64> {
        self.jobs.iter().map(|j| j.mean_rate).collect()
    }

    /// Replaces the per-class arrival statistics.
    pub fn with_arrival_stats(&self, mean: &[f64], bound: &[f64]) -> Result<Self, ModelError> {
        let mut jobs = self.jobs.clone();
        if mean.len() != jobs.len() || bound.len() != jobs.len() {
            return Err(ModelError::Dimension {
                what: "arrival statistics",
                expected: jobs.len(),
                got: mean.len().min(bound.len()),
            });
        }
        for (j, job) in jobs.iter_mut().enumerate() {
            job.mean_rate = mean[j];
            job.arrival_bound = bound[j];
        }
        Self::new(self.idcs.clone(), jobs, self.power, self.link_costs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_idc() -> Topology {
        let jobs = vec![
            JobClass {
                origin: 0,
                serving_set: vec![1, 0],
                rates: vec![3.0, 2.0],
                mean_rate: 1.0,
                arrival_bound: 2.0,
            },
            JobClass {
                origin: 1,
                serving_set: vec![0],
                rates: vec![1.5],
                mean_rate: 0.5,
                arrival_bound: 1.0,
            },
        ];
        Topology::with_uniform_links(
            vec![IdcSpec { k_max: 10.0 }, IdcSpec { k_max: 10.0 }],
            jobs,
            PowerModel::default(),
            ShiftCostModel::default(),
        )
        .unwrap()
    }

    #[test]
    fn derived_sets_are_consistent() {
        let t = two_idc();
        assert_eq!(t.jobs()[0].serving_set, vec![0, 1]);
        assert_eq!(t.jobs()[0].rates, vec![2.0, 3.0]);
        assert_eq!(t.n_vars(), 3);
        assert_eq!(t.served_at(0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(t.served_at(1).collect::<Vec<_>>(), vec![0]);
        assert_eq!(t.shiftable(0, 1).collect::<Vec<_>>(), vec![0]);
        assert_eq!(t.shiftable(1, 0).collect::<Vec<_>>(), vec![1]);
        assert_eq!(t.shiftable(0, 0).count(), 0);
        for (k, v) in t.vars().iter().enumerate() {
            assert_eq!(t.var_index(v.idc, v.job), Some(k));
            assert_eq!(v.link.is_some(), v.idc != t.jobs()[v.job].origin);
        }
    }

    #[test]
    fn origin_outside_serving_set_is_allowed() {
        let t = two_idc();
        assert!(!t.jobs()[1].serving_set.contains(&t.jobs()[1].origin));
    }

    #[test]
    fn validation_errors() {
        let mk = |job: JobClass| {
            Topology::with_uniform_links(
                vec![IdcSpec { k_max: 1.0 }],
                vec![job],
                PowerModel::default(),
                ShiftCostModel::default(),
            )
        };
        let ok = JobClass {
            origin: 0,
            serving_set: vec![0],
            rates: vec![1.0],
            mean_rate: 0.0,
            arrival_bound: 0.0,
        };
        assert!(mk(ok.clone()).is_ok());
        assert!(mk(JobClass { serving_set: vec![], rates: vec![], ..ok.clone() }).is_err());
        assert!(mk(JobClass { rates: vec![0.0], ..ok.clone() }).is_err());
        assert!(mk(JobClass { origin: 3, ..ok.clone() }).is_err());
        assert!(mk(JobClass { mean_rate: 2.0, arrival_bound: 1.0, ..ok.clone() }).is_err());
        assert!(mk(JobClass { serving_set: vec![0, 0], rates: vec![1.0, 1.0], ..ok }).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let t = two_idc();
        let s = serde_json::to_string(&t).unwrap();
        let back: Topology = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
