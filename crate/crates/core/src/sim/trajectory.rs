use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::model::ModelSpec;

/// A dark-pool execution. Events in a forced final step have size 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpEvent {
    pub t: f64,
    /// Executed at node `step + 1`.
    pub step: usize,
    pub atom_id: i64,
    pub size: f64,
}

/// One simulated path on the grid nodes `t_0 = 0, ..., t_n = T`.
///
/// `xi[i]` is the average primary-market rate over `(t_i, t_{i+1}]`, i.e.
/// `(x_post[i] - x_pre[i + 1]) / dt`. Fills land at the right node of the
/// step they occur in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub x_pre: Vec<f64>,
    pub x_post: Vec<f64>,
    pub xi: Vec<f64>,
    pub fill_atom: Vec<Option<i64>>,
    pub fill_size: Vec<f64>,
    pub events: Vec<JumpEvent>,
    pub n_atoms: usize,
    /// Order sizes `ρ_k` at `(t_i, x_post[i])`, `n_atoms` per step.
    pub rho_start: Vec<f64>,
    /// Order sizes `ρ_k` at `(t_{i+1}, x_pre[i + 1])`, `n_atoms` per step.
    pub rho_end: Vec<f64>,
    /// Running cost totals at each node.
    pub cost_impact: Vec<f64>,
    pub cost_risk: Vec<f64>,
    pub cost_slippage: Vec<f64>,
    pub forced_terminal: bool,
}

impl Trajectory {
    pub(crate) fn start(times: Vec<f64>, y: Vec<f64>, x0: f64, n_atoms: usize) -> Self {
        let nodes = times.len();
        let steps = nodes - 1;
        let mut x_pre = vec![0.0; nodes];
        let mut x_post = vec![0.0; nodes];
        x_pre[0] = x0;
        x_post[0] = x0;
        Trajectory {
            times,
            y,
            x_pre,
            x_post,
            xi: vec![0.0; nodes],
            fill_atom: vec![None; nodes],
            fill_size: vec![0.0; nodes],
            events: Vec::new(),
            n_atoms,
            rho_start: vec![0.0; steps * n_atoms],
            rho_end: vec![0.0; steps * n_atoms],
            cost_impact: vec![0.0; nodes],
            cost_risk: vec![0.0; nodes],
            cost_slippage: vec![0.0; nodes],
            forced_terminal: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn x0(&self) -> f64 {
        self.x_post[0]
    }

    pub fn terminal_inventory(&self) -> f64 {
        self.x_post[self.steps()]
    }

    pub(crate) fn record_fill(&mut self, step: usize, t: f64, atom_id: i64, size: f64) {
        self.events.push(JumpEvent { t, step, atom_id, size });
        self.fill_atom[step + 1] = Some(atom_id);
        self.fill_size[step + 1] += size;
    }

    /// `true` when the post-jump inventory never increases and stays `>= 0`.
    pub fn is_monotone(&self) -> bool {
        let n = self.steps();
        (0..=n).all(|i| self.x_pre[i] >= 0.0 && self.x_post[i] >= 0.0 && self.x_post[i] <= self.x_pre[i])
            && (0..n).all(|i| self.x_pre[i + 1] <= self.x_post[i])
    }

    /// Fills the running cost columns from the stored path.
    pub(crate) fn accumulate(&mut self, spec: &ModelSpec) {
        let mut acc = (0.0, 0.0, 0.0);
        for (i, (imp, risk, slip)) in step_costs(self, spec).into_iter().enumerate() {
            acc.0 += imp;
            acc.1 += risk;
            acc.2 += slip;
            self.cost_impact[i + 1] = acc.0;
            self.cost_risk[i + 1] = acc.1;
            self.cost_slippage[i + 1] = acc.2;
        }
    }

    /// Mirror image `x -> -x`; costs are unchanged.
    pub fn negated(&self) -> Self {
        let flip = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
        let mut out = self.clone();
        out.x_pre = flip(&self.x_pre);
        out.x_post = flip(&self.x_post);
        out.xi = flip(&self.xi);
        out.fill_size = flip(&self.fill_size);
        out.rho_start = flip(&self.rho_start);
        out.rho_end = flip(&self.rho_end);
        for e in &mut out.events {
            e.size = -e.size;
        }
        out
    }

    /// Columns `t,y,x_pre,x_post,xi,fill_atom,fill_size,cost_impact,cost_risk,cost_slippage`;
    /// `fill_atom` is empty at nodes without a fill.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,y,x_pre,x_post,xi,fill_atom,fill_size,cost_impact,cost_risk,cost_slippage")?;
        for i in 0..self.times.len() {
            let atom = self.fill_atom[i].map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{:.12e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i],
                self.y[i],
                self.x_pre[i],
                self.x_post[i],
                self.xi[i],
                atom,
                self.fill_size[i],
                self.cost_impact[i],
                self.cost_risk[i],
                self.cost_slippage[i]
            )?;
        }
        Ok(())
    }
}

/// Per-step `(impact, risk, slippage)`.
///
/// Impact is `η(t_i, y_i) xi[i]² dt`; risk and the compensated slippage
/// `Σ_k γ_k μ_k ρ_k²` use the trapezoid rule on the step's end values.
fn step_costs(traj: &Trajectory, spec: &ModelSpec) -> Vec<(f64, f64, f64)> {
    let atoms = &spec.dark_pool.atoms;
    let k_count = traj.n_atoms;
    let slip = |t: f64, y: f64, rho: &[f64]| -> f64 {
        atoms
            .iter()
            .zip(rho)
            .map(|(a, &r)| {
                if r == 0.0 {
                    0.0
                } else {
                    a.gamma.eval(t, y) * a.mu * r * r
                }
            })
            .sum()
    };
    (0..traj.steps())
        .map(|i| {
            let (t0, t1) = (traj.times[i], traj.times[i + 1]);
            let (y0, y1) = (traj.y[i], traj.y[i + 1]);
            let dt = t1 - t0;
            let impact = spec.eta.eval(t0, y0) * traj.xi[i] * traj.xi[i] * dt;
            let (xa, xb) = (traj.x_post[i], traj.x_pre[i + 1]);
            let risk = 0.5 * dt * (spec.lambda.eval(t0, y0) * xa * xa + spec.lambda.eval(t1, y1) * xb * xb);
            let slippage = if k_count == 0 {
                0.0
            } else {
                let rs = &traj.rho_start[i * k_count..(i + 1) * k_count];
                let re = &traj.rho_end[i * k_count..(i + 1) * k_count];
                0.5 * dt * (slip(t0, y0, rs) + slip(t1, y1, re))
            };
            (impact, risk, slippage)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub impact: f64,
    pub risk: f64,
    pub slippage: f64,
    pub total: f64,
}

impl fmt::Display for CostBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "total={:.12} impact={:.12} risk={:.12} slippage={:.12}",
            self.total, self.impact, self.risk, self.slippage
        )
    }
}

/// `∫ η ξ² + ∫ λ x² + ∫ Σ_k γ_k ρ_k² μ_k` along the path.
pub fn evaluate_cost(traj: &Trajectory, spec: &ModelSpec) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    for (imp, risk, slip) in step_costs(traj, spec) {
        c.impact += imp;
        c.risk += risk;
        c.slippage += slip;
    }
    c.total = c.impact + c.risk + c.slippage;
    c
}
