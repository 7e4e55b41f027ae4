//! Known-value checks: the worked examples, the scoring arithmetic, and
//! spot checks of the losses, centrality and Wilcoxon test.

use teamdm::appraisal::{centrality, stationarity_residual};
use teamdm::loss::{l1_loss, l2_loss, oracle_min_cross_entropy, Direction};
use teamdm::models::{cent_option_probs, nb_posterior, random_baseline};
use teamdm::reward::RewardScheme;
use teamdm::session::{Choice, Responses};
use teamdm::sim::expected_score_explore_exploit;
use teamdm::stats::wilcoxon_signed_rank;
use teamdm::{LossKind, ModelKind, ModelParams, PtParams, TeamBeliefState};

use crate::error::{CliError, CliResult};
use crate::Common;

struct Fixture {
    name: &'static str,
    got: Vec<f64>,
    want: Vec<f64>,
    tol: f64,
}

impl Fixture {
    fn new(
        name: &'static str,
        got: impl Into<Vec<f64>>,
        want: impl Into<Vec<f64>>,
        tol: f64,
    ) -> Self {
        Self {
            name,
            got: got.into(),
            want: want.into(),
            tol,
        }
    }

    fn holds(&self) -> bool {
        self.got.len() == self.want.len()
            && self
                .got
                .iter()
                .zip(&self.want)
                .all(|(g, w)| (g - w).abs() <= self.tol)
    }
}

fn resp(v: [u8; 4]) -> Responses {
    v.map(|k| Some(Choice::new(k).expect("option in 1..=4")))
}

// 3.14 is an expected reward, not π
#[allow(clippy::approx_constant)]
fn fixtures(s: &RewardScheme) -> Vec<Fixture> {
    let opt = |p: &[f64]| p.iter().map(|p| s.option_reward(*p)).collect::<Vec<_>>();
    let agt = |p: &[f64]| p.iter().map(|p| s.agent_reward(*p)).collect::<Vec<_>>();
    let initial = TeamBeliefState::initial(*s);
    let mut out = Vec::new();

    let post = nb_posterior(&[0.5, 0.4, 0.8, 0.6], &resp([1, 2, 1, 3]), None);
    out.push(Fixture::new(
        "example-1 posterior",
        post,
        [0.828, 0.046, 0.103, 0.023],
        1e-3,
    ));
    out.push(Fixture::new(
        "example-1 option rewards",
        opt(&post),
        [3.14, -0.77, -0.485, -0.885],
        1e-2,
    ));
    out.push(Fixture::new(
        "example-1 agent rewards",
        agt(&initial.agent_means()),
        [1.75; 4],
        1e-12,
    ));

    // votes split two and two between options 2 and 3
    let post = nb_posterior(&[0.5; 4], &resp([2, 2, 3, 3]), None);
    out.push(Fixture::new(
        "example-2 posterior",
        post,
        [0.05, 0.45, 0.45, 0.05],
        1e-12,
    ));
    out.push(Fixture::new(
        "example-2 option rewards",
        opt(&post),
        [-0.75, 1.25, 1.25, -0.75],
        1e-12,
    ));
    let updated: Vec<f64> = initial
        .human_appraisals
        .iter()
        .zip([false, false, true, true])
        .map(|(a, c)| a.observe(c).mean())
        .collect();
    out.push(Fixture::new(
        "example-2 appraisal updates",
        updated,
        [1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
        1e-12,
    ));

    let mut cent = TeamBeliefState::initial(*s);
    cent.influence.delta = [0.4, 0.3, 0.2, 0.1];
    cent.agent_ratings = [
        [0.45, 0.67, 0.85, 0.6],
        [0.6, 0.75, 0.9, 0.55],
        [0.8, 0.65, 0.7, 0.5],
        [0.75, 0.75, 0.95, 1.0],
    ];
    let ratings = cent.collective_agent_ratings();
    out.push(Fixture::new(
        "centrality-weighted ratings",
        ratings,
        [0.595, 0.698, 0.845, 0.605],
        1e-9,
    ));
    let probs = cent_option_probs(&cent, &resp([1, 2, 1, 3]));
    out.push(Fixture::new(
        "centrality option rewards",
        opt(&probs),
        [2.0, 0.5, -0.5, -1.0],
        1e-9,
    ));
    out.push(Fixture::new(
        "centrality agent rewards",
        agt(&ratings),
        [0.975, 1.49, 2.225, 1.025],
        1e-9,
    ));

    let explore =
        expected_score_explore_exploit(&[0.5, 0.6, 0.7, 0.8], 6, 45, s).unwrap_or(f64::NAN);
    out.push(Fixture::new(
        "explore-exploit expected score",
        [explore],
        [72.0],
        1e-9,
    ));
    out
}

fn spot_checks() -> CliResult<Vec<Fixture>> {
    let mut out = Vec::new();
    let mut baseline = Vec::new();
    for n in [8usize, 4] {
        let d = random_baseline(n)?;
        baseline.extend(LossKind::ALL.map(|l| l.loss(d.probs(), 0)));
    }
    let want: Vec<f64> = [8f64.ln(); 3].into_iter().chain([4f64.ln(); 3]).collect();
    out.push(Fixture::new(
        "random baseline losses",
        baseline,
        want,
        1e-12,
    ));

    let qs: [&[f64]; 3] = [
        &[0.5, 0.3, 0.2],
        &[0.4, 0.3, 0.2, 0.1],
        &[0.3, 0.25, 0.15, 0.1, 0.08, 0.06, 0.04, 0.02],
    ];
    let (mut closed, mut oracle) = (Vec::new(), Vec::new());
    for q in qs {
        for i in 0..q.len() {
            closed.push(l1_loss(q, i));
            oracle.push(oracle_min_cross_entropy(q, i, Direction::QP, 1e-3)?.1);
            closed.push(l2_loss(q, i));
            oracle.push(oracle_min_cross_entropy(q, i, Direction::PQ, 1e-3)?.1);
        }
    }
    out.push(Fixture::new(
        "losses against simplex oracle",
        closed,
        oracle,
        2e-3,
    ));

    let w = [
        [0.1, 0.2, 0.3, 0.4],
        [0.4, 0.3, 0.2, 0.1],
        [0.25, 0.25, 0.25, 0.25],
        [0.0, 0.5, 0.5, 0.0],
    ];
    let c = centrality(&w)?;
    out.push(Fixture::new(
        "centrality residual",
        [stationarity_residual(&c.delta, &w)],
        [0.0],
        1e-10,
    ));

    let s = TeamBeliefState::initial(RewardScheme::default());
    let r = resp([1, 2, 1, 3]);
    let identity = ModelParams {
        pt: Some(PtParams::IDENTITY),
        ..ModelParams::default()
    };
    let pt = ModelKind::PtNb.dt1(&s, &r, &identity)?;
    let nb = ModelKind::Nb.dt1(&s, &r, &identity)?;
    out.push(Fixture::new(
        "identity PT equals NB",
        pt.probs(),
        nb.probs(),
        1e-12,
    ));

    // six positive differences: W⁺ = 21 is the most extreme of 64 sign patterns
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let p = wilcoxon_signed_rank(&x, &[0.0; 6])?.p_value;
    out.push(Fixture::new("exact Wilcoxon p", [p], [2.0 / 64.0], 1e-15));
    Ok(out)
}

pub fn run(common: &Common) -> CliResult<()> {
    let mut all = fixtures(&common.scheme);
    all.extend(spot_checks()?);
    let mut failed = Vec::new();
    for f in &all {
        if f.holds() {
            println!("ok    {}", f.name);
        } else {
            println!(
                "FAIL  {}: got {:?}, want {:?} (tolerance {:e})",
                f.name, f.got, f.want, f.tol
            );
            failed.push(f.name);
        }
    }
    if failed.is_empty() {
        println!("{} checks passed", all.len());
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            all.len(),
            failed.join(", ")
        )))
    }
}
