//! Hierarchical intuitionistic fuzzy inference for push recovery.
//!
//! Layer 1 classifies the disturbance: crisp push force, push direction and
//! stability margin map to a severity in [0, 1]. Layer 2 turns severity and
//! a per-joint belongingness weight into joint angle and velocity
//! corrections. Inference is Mamdani min-max with centroid defuzzification
//! on a 201-point grid; intuitionistic non-membership and hesitation are
//! derived from membership with a global hesitation constant and recorded
//! for diagnostics without influencing rule firing.
//!
//! Rule bases are plain text (see [`parse_rule_text`]):
//!
//! ```text
//! # comment
//! var push_force 0 50
//! term push_force weak tri 0 0 15
//! term push_force strong trap 25 40 50 50
//! rule IF push_force IS weak AND margin IS stable THEN severity IS low WEIGHT 1.0
//! ```
//!
//! A term label may be declared several times; its membership is the
//! pointwise maximum of the pieces (used for wrap-around direction lobes).
//! The built-in rule base ships in `data/default_rules.txt` and can be
//! replaced through the experiment configuration.

use std::collections::BTreeMap;

use nalgebra::Vector6;

use crate::control::{strategy_select, Strategy};
use crate::error::{Error, Result};
use crate::model::{BipedState, JointId};

/// Number of grid points for aggregation and defuzzification.
pub const GRID_POINTS: usize = 201;

/// Severity below this is treated as exactly zero so an unperturbed run is
/// bit-identical with the correction layer on or off.
pub const SEVERITY_DEADBAND: f64 = 0.05;

/// Piecewise-linear membership function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFn {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFn {
    fn validate(&self) -> std::result::Result<(), String> {
        let ok = match self {
            MembershipFn::Triangular { a, b, c } => a <= b && b <= c && a < c,
            MembershipFn::Trapezoidal { a, b, c, d } => a <= b && b <= c && c <= d && a < d,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("membership parameters must be ordered: {self:?}"))
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            MembershipFn::Triangular { a, c, .. } => (*a, *c),
            MembershipFn::Trapezoidal { a, d, .. } => (*a, *d),
        }
    }
}

/// Evaluate a membership function; zero outside its support, peak 1.
pub fn membership(mf: &MembershipFn, x: f64) -> f64 {
    match *mf {
        MembershipFn::Triangular { a, b, c } => {
            if x < a || x > c {
                0.0
            } else if x == b {
                1.0
            } else if x < b {
                (x - a) / (b - a)
            } else {
                (c - x) / (c - b)
            }
        }
        MembershipFn::Trapezoidal { a, b, c, d } => {
            if x < a || x > d {
                0.0
            } else if x >= b && x <= c {
                1.0
            } else if x < b {
                (x - a) / (b - a)
            } else {
                (d - x) / (d - c)
            }
        }
    }
}

/// Intuitionistic degrees: membership, non-membership and hesitation,
/// summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfsDegree {
    pub mu: f64,
    pub nu: f64,
    pub pi: f64,
}

/// Split the complement of the membership into non-membership and
/// hesitation: nu = (1 - mu)(1 - h0), pi = (1 - mu) h0.
pub fn ifs_degree(mf: &MembershipFn, x: f64, hesitation0: f64) -> IfsDegree {
    let mu = membership(mf, x);
    IfsDegree {
        mu,
        nu: (1.0 - mu) * (1.0 - hesitation0),
        pi: (1.0 - mu) * hesitation0,
    }
}

/// A linguistic term: one label with one or more membership pieces
/// (evaluated as their pointwise maximum).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub label: String,
    pub pieces: Vec<MembershipFn>,
}

impl Term {
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .map(|mf| membership(mf, x))
            .fold(0.0, f64::max)
    }
}

/// A named linguistic variable over a crisp universe.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyVariable {
    pub name: String,
    pub universe: (f64, f64),
    pub terms: Vec<Term>,
}

impl FuzzyVariable {
    fn term(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label == label)
    }
}

/// One Mamdani rule: min-combined antecedents, one consequent term, a
/// firing weight in [0, 1]. Indices are resolved at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// (input variable index, term index) pairs.
    pub antecedents: Vec<(usize, usize)>,
    /// Consequent term index within the base's output variable.
    pub consequent: usize,
    pub weight: f64,
}

/// A single-output Mamdani rule base.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    pub inputs: Vec<FuzzyVariable>,
    pub output: FuzzyVariable,
    pub rules: Vec<Rule>,
}

/// Aggregated output fuzzy set sampled on the defuzzification grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub universe: (f64, f64),
    pub values: [f64; GRID_POINTS],
}

impl Aggregate {
    pub fn grid_x(&self, i: usize) -> f64 {
        let (lo, hi) = self.universe;
        lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64
    }
}

impl RuleBase {
    /// Clip-and-max Mamdani inference. `inputs` maps variable names to
    /// crisp values; every input variable of the base must be present.
    pub fn infer(&self, inputs: &BTreeMap<&str, f64>) -> Result<Aggregate> {
        let mut crisp = Vec::with_capacity(self.inputs.len());
        for var in &self.inputs {
            let v = inputs
                .get(var.name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingInput {
                    variable: var.name.clone(),
                })?;
            crisp.push(v);
        }
        let mut agg = Aggregate {
            universe: self.output.universe,
            values: [0.0; GRID_POINTS],
        };
        for rule in &self.rules {
            let mut strength = rule.weight;
            for &(var, term) in &rule.antecedents {
                strength = strength.min(self.inputs[var].terms[term].eval(crisp[var]));
            }
            if strength <= 0.0 {
                continue;
            }
            let term = &self.output.terms[rule.consequent];
            for i in 0..GRID_POINTS {
                let x = agg.grid_x(i);
                let clipped = term.eval(x).min(strength);
                if clipped > agg.values[i] {
                    agg.values[i] = clipped;
                }
            }
        }
        Ok(agg)
    }
}

/// Centroid over the grid: sum(x mu) / sum(mu). A zero-area aggregate
/// yields the universe midpoint and sets the flag.
pub fn defuzzify_centroid(agg: &Aggregate) -> (f64, bool) {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..GRID_POINTS {
        num += agg.grid_x(i) * agg.values[i];
        den += agg.values[i];
    }
    if den <= 0.0 {
        ((agg.universe.0 + agg.universe.1) / 2.0, true)
    } else {
        (num / den, false)
    }
}

/// Per-joint recovery command.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCommand {
    pub delta_q: Vector6<f64>,
    pub delta_qdot: Vector6<f64>,
    pub strategy: Strategy,
    pub severity: f64,
    /// True when an input had to be clamped to its declared universe.
    pub saturated: bool,
}

impl RecoveryCommand {
    pub fn neutral(strategy: Strategy) -> Self {
        Self {
            delta_q: Vector6::zeros(),
            delta_qdot: Vector6::zeros(),
            strategy,
            severity: 0.0,
            saturated: false,
        }
    }
}

/// Tunables that live outside the rule text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyOptions {
    /// Per-joint belongingness weights, indexed by [`JointId`].
    pub belongingness: [f64; 6],
    /// Global hesitation constant for the intuitionistic split.
    pub hesitation0: f64,
    /// Margin below which stepping is selected (passed to the strategy
    /// ladder so the command can carry the active strategy).
    pub hip_threshold: f64,
}

impl Default for FuzzyOptions {
    fn default() -> Self {
        Self {
            // Knee dominates, hip close behind, ankle least involved.
            belongingness: [0.8, 1.0, 0.5, 0.8, 1.0, 0.5],
            hesitation0: 0.1,
            hip_threshold: -0.05,
        }
    }
}

/// The full two-layer system: disturbance severity, then per-joint
/// corrections. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySystem {
    pub layer1: RuleBase,
    pub layer2_dq: RuleBase,
    pub layer2_dqdot: RuleBase,
    pub options: FuzzyOptions,
}

/// Text of the built-in rule base.
pub const DEFAULT_RULES: &str = include_str!("../data/default_rules.txt");

impl FuzzySystem {
    /// Parse a rule text into the two-layer system. Layer 1 is the base
    /// with output `severity`; layer 2 consists of the bases with outputs
    /// `delta_q` and `delta_qdot`.
    pub fn from_rule_text(text: &str, file: &str, options: FuzzyOptions) -> Result<Self> {
        for (i, b) in options.belongingness.iter().enumerate() {
            if !(0.0..=1.0).contains(b) {
                return Err(Error::RuleBase(format!(
                    "belongingness[{i}] = {b} outside [0, 1]"
                )));
            }
        }
        if !(0.0..1.0).contains(&options.hesitation0) {
            return Err(Error::RuleBase(format!(
                "hesitation0 = {} outside [0, 1)",
                options.hesitation0
            )));
        }
        let bases = parse_rule_text(text, file)?;
        let take = |name: &str| -> Result<RuleBase> {
            bases
                .iter()
                .find(|b| b.output.name == name)
                .cloned()
                .ok_or_else(|| {
                    Error::RuleBase(format!("no rules produce output variable `{name}`"))
                })
        };
        Ok(Self {
            layer1: take("severity")?,
            layer2_dq: take("delta_q")?,
            layer2_dqdot: take("delta_qdot")?,
            options,
        })
    }

    /// The built-in system with default options.
    pub fn builtin() -> Self {
        Self::from_rule_text(DEFAULT_RULES, "data/default_rules.txt", FuzzyOptions::default())
            .expect("built-in rule base is valid")
    }

    pub fn with_options(options: FuzzyOptions) -> Self {
        Self::from_rule_text(DEFAULT_RULES, "data/default_rules.txt", options)
            .expect("built-in rule base is valid")
    }
}

fn clamp_to(universe: (f64, f64), v: f64, saturated: &mut bool) -> f64 {
    let c = v.clamp(universe.0, universe.1);
    if c != v {
        *saturated = true;
    }
    c
}

/// Run both layers: severity from (force, direction, margin), then joint
/// corrections scaled by belongingness and signed by the horizontal push
/// direction. Corrections are clamped so the shifted reference cannot leave
/// the joint limits of the current state.
pub fn hierarchical_infer(
    system: &FuzzySystem,
    push_force: f64,
    push_direction: f64,
    margin: f64,
    joint_state: &BipedState,
    model: &crate::model::BipedModel,
) -> Result<RecoveryCommand> {
    let strategy = strategy_select(margin, system.options.hip_threshold);
    let mut saturated = false;

    let mut inputs = BTreeMap::new();
    let l1 = &system.layer1;
    let force_u = var_universe(l1, "push_force").unwrap_or((0.0, 50.0));
    let dir_u = var_universe(l1, "push_direction")
        .unwrap_or((-std::f64::consts::PI, std::f64::consts::PI));
    let margin_u = var_universe(l1, "margin").unwrap_or((-0.1, 0.1));
    let dir_wrapped = crate::kinematics::wrap_angle(push_direction);
    inputs.insert("push_force", clamp_to(force_u, push_force, &mut saturated));
    inputs.insert("push_direction", clamp_to(dir_u, dir_wrapped, &mut saturated));
    inputs.insert("margin", clamp_to(margin_u, margin, &mut saturated));

    let (severity_raw, _) = defuzzify_centroid(&l1.infer(&inputs)?);
    if severity_raw < SEVERITY_DEADBAND {
        return Ok(RecoveryCommand {
            saturated,
            ..RecoveryCommand::neutral(strategy)
        });
    }
    let severity = severity_raw;

    // The correction leans against the horizontal push component.
    let direction_gain = dir_wrapped.cos();
    let mut delta_q = Vector6::zeros();
    let mut delta_qdot = Vector6::zeros();
    for joint in JointId::ALL {
        let b = system.options.belongingness[joint as usize];
        if b == 0.0 {
            continue;
        }
        let mut l2_inputs = BTreeMap::new();
        l2_inputs.insert("severity", severity);
        l2_inputs.insert("belongingness", b);
        let (mag_q, _) = defuzzify_centroid(&system.layer2_dq.infer(&l2_inputs)?);
        let (mag_qd, _) = defuzzify_centroid(&system.layer2_dqdot.infer(&l2_inputs)?);
        let limits = model.joint(joint);
        let q = joint_state.q[joint as usize];
        let dq = (direction_gain * b * mag_q).clamp(limits.min - q, limits.max - q);
        delta_q[joint as usize] = dq;
        delta_qdot[joint as usize] = direction_gain * b * mag_qd;
    }

    Ok(RecoveryCommand {
        delta_q,
        delta_qdot,
        strategy,
        severity,
        saturated,
    })
}

fn var_universe(base: &RuleBase, name: &str) -> Option<(f64, f64)> {
    base.inputs
        .iter()
        .find(|v| v.name == name)
        .map(|v| v.universe)
}

/// Parse rule text into single-output rule bases, grouped by consequent
/// variable. Every error carries the 1-based line number.
pub fn parse_rule_text(text: &str, file: &str) -> Result<Vec<RuleBase>> {
    let mut vars: Vec<FuzzyVariable> = Vec::new();
    let mut raw_rules: Vec<(usize, Vec<(String, String)>, String, String, f64)> = Vec::new();

    let err = |line: usize, reason: String| Error::Parse {
        file: file.into(),
        line,
        reason,
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "var" => {
                if tokens.len() != 4 {
                    return Err(err(line_no, "expected `var <name> <min> <max>`".into()));
                }
                let min: f64 = tokens[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad number `{}`", tokens[2])))?;
                let max: f64 = tokens[3]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad number `{}`", tokens[3])))?;
                if !(min < max) {
                    return Err(err(line_no, "universe needs min < max".into()));
                }
                if vars.iter().any(|v| v.name == tokens[1]) {
                    return Err(err(line_no, format!("variable `{}` redeclared", tokens[1])));
                }
                vars.push(FuzzyVariable {
                    name: tokens[1].into(),
                    universe: (min, max),
                    terms: Vec::new(),
                });
            }
            "term" => {
                if tokens.len() < 5 {
                    return Err(err(
                        line_no,
                        "expected `term <var> <label> tri|trap <params...>`".into(),
                    ));
                }
                let var = vars
                    .iter_mut()
                    .find(|v| v.name == tokens[1])
                    .ok_or_else(|| err(line_no, format!("unknown variable `{}`", tokens[1])))?;
                let nums: Vec<f64> = tokens[4..]
                    .iter()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(line_no, "bad membership parameter".into()))?;
                let mf = match (tokens[3], nums.len()) {
                    ("tri", 3) => MembershipFn::Triangular {
                        a: nums[0],
                        b: nums[1],
                        c: nums[2],
                    },
                    ("trap", 4) => MembershipFn::Trapezoidal {
                        a: nums[0],
                        b: nums[1],
                        c: nums[2],
                        d: nums[3],
                    },
                    _ => {
                        return Err(err(
                            line_no,
                            "shape must be `tri a b c` or `trap a b c d`".into(),
                        ))
                    }
                };
                mf.validate().map_err(|e| err(line_no, e))?;
                let (lo, hi) = mf.support();
                if lo < var.universe.0 - 1e-12 || hi > var.universe.1 + 1e-12 {
                    return Err(err(
                        line_no,
                        format!(
                            "term support [{lo}, {hi}] outside universe [{}, {}]",
                            var.universe.0, var.universe.1
                        ),
                    ));
                }
                match var.terms.iter_mut().find(|t| t.label == tokens[2]) {
                    Some(term) => term.pieces.push(mf),
                    None => var.terms.push(Term {
                        label: tokens[2].into(),
                        pieces: vec![mf],
                    }),
                }
            }
            "rule" => {
                // rule IF a IS x AND b IS y THEN out IS z [WEIGHT w]
                let mut weight = 1.0;
                let mut body = &tokens[1..];
                if body.len() >= 2 && body[body.len() - 2] == "WEIGHT" {
                    weight = body[body.len() - 1]
                        .parse()
                        .map_err(|_| err(line_no, "bad weight".into()))?;
                    if !(0.0..=1.0).contains(&weight) {
                        return Err(err(line_no, format!("weight {weight} outside [0, 1]")));
                    }
                    body = &body[..body.len() - 2];
                }
                if body.first() != Some(&"IF") {
                    return Err(err(line_no, "rule must start with IF".into()));
                }
                let then_pos = body
                    .iter()
                    .position(|t| *t == "THEN")
                    .ok_or_else(|| err(line_no, "rule missing THEN".into()))?;
                let parse_clause =
                    |clause: &[&str]| -> std::result::Result<(String, String), Error> {
                        if clause.len() != 3 || clause[1] != "IS" {
                            return Err(err(line_no, "clause must be `<var> IS <term>`".into()));
                        }
                        Ok((clause[0].into(), clause[2].into()))
                    };
                let mut antecedents = Vec::new();
                let mut chunk = &body[1..then_pos];
                loop {
                    if chunk.len() < 3 {
                        return Err(err(line_no, "malformed antecedent".into()));
                    }
                    antecedents.push(parse_clause(&chunk[..3])?);
                    if chunk.len() == 3 {
                        break;
                    }
                    if chunk[3] != "AND" {
                        return Err(err(line_no, "antecedents join with AND".into()));
                    }
                    chunk = &chunk[4..];
                }
                let (out_var, out_term) = parse_clause(&body[then_pos + 1..])?;
                raw_rules.push((line_no, antecedents, out_var, out_term, weight));
            }
            other => {
                return Err(err(
                    line_no,
                    format!("unknown directive `{other}` (expected var/term/rule)"),
                ));
            }
        }
    }

    // Group rules by output variable and resolve names to indices.
    let mut grouped: BTreeMap<String, Vec<(usize, Vec<(String, String)>, String, f64)>> =
        BTreeMap::new();
    for (line, ants, out_var, out_term, weight) in raw_rules {
        grouped
            .entry(out_var)
            .or_default()
            .push((line, ants, out_term, weight));
    }

    let find_var = |name: &str, line: usize| -> Result<usize> {
        vars.iter()
            .position(|v| v.name == name)
            .ok_or_else(|| err(line, format!("unknown variable `{name}`")))
    };

    let mut bases = Vec::new();
    for (out_name, rules) in grouped {
        let out_idx = find_var(&out_name, rules[0].0)?;
        // Input variables referenced by this base's rules.
        let mut input_idx: Vec<usize> = Vec::new();
        for (line, ants, _, _) in &rules {
            for (var_name, _) in ants {
                let vi = find_var(var_name, *line)?;
                if vi == out_idx {
                    return Err(err(*line, format!("`{out_name}` used as its own input")));
                }
                if !input_idx.contains(&vi) {
                    input_idx.push(vi);
                }
            }
        }
        input_idx.sort_unstable();
        let inputs: Vec<FuzzyVariable> = input_idx.iter().map(|&i| vars[i].clone()).collect();
        let output = vars[out_idx].clone();
        let mut resolved = Vec::new();
        for (line, ants, out_term, weight) in rules {
            let mut antecedents = Vec::new();
            for (var_name, term_name) in ants {
                let vi = find_var(&var_name, line)?;
                let local = input_idx.iter().position(|&i| i == vi).unwrap();
                let ti = inputs[local].term(&term_name).ok_or_else(|| {
                    err(line, format!("variable `{var_name}` has no term `{term_name}`"))
                })?;
                antecedents.push((local, ti));
            }
            let consequent = output
                .term(&out_term)
                .ok_or_else(|| err(line, format!("output has no term `{out_term}`")))?;
            resolved.push(Rule {
                antecedents,
                consequent,
                weight,
            });
        }
        bases.push(RuleBase {
            inputs,
            output,
            rules: resolved,
        });
    }
    if bases.is_empty() {
        return Err(Error::Parse {
            file: file.into(),
            line: text.lines().count().max(1),
            reason: "no rules defined".into(),
        });
    }
    Ok(bases)
}

/// Load a rule file from disk.
pub fn load_rule_file(path: &std::path::Path) -> Result<Vec<RuleBase>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_rule_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, BipedState, ModelConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn membership_examples() {
        let tri = MembershipFn::Triangular {
            a: 0.0,
            b: 0.5,
            c: 1.0,
        };
        assert_relative_eq!(membership(&tri, 0.25), 0.5);
        assert_eq!(membership(&tri, 0.5), 1.0);
        assert_eq!(membership(&tri, -0.1), 0.0);
        assert_eq!(membership(&tri, 1.1), 0.0);
        // Shoulder triangle with a vertical edge.
        let shoulder = MembershipFn::Triangular {
            a: 0.0,
            b: 0.0,
            c: 1.0,
        };
        assert_eq!(membership(&shoulder, 0.0), 1.0);
        assert_relative_eq!(membership(&shoulder, 0.5), 0.5);
    }

    #[test]
    fn ifs_degrees_sum_to_one() {
        let tri = MembershipFn::Triangular {
            a: 0.0,
            b: 0.5,
            c: 1.0,
        };
        let d = ifs_degree(&tri, 0.5, 0.3);
        assert_eq!(d.mu, 1.0);
        assert_eq!(d.nu, 0.0);
        assert_eq!(d.pi, 0.0);

        let d = ifs_degree(&tri, 0.35, 0.1);
        assert_relative_eq!(d.mu, 0.7);
        assert_relative_eq!(d.nu, 0.27, epsilon = 1e-12);
        assert_relative_eq!(d.pi, 0.03, epsilon = 1e-12);
        assert!((d.mu + d.nu + d.pi - 1.0).abs() < 1e-12);
    }

    fn tiny_base() -> RuleBase {
        parse_rule_text(
            "var x 0 1\n\
             term x lo tri 0 0 0.6\n\
             term x hi tri 0.4 1 1\n\
             var y 0 1\n\
             term y small tri 0 0.25 0.5\n\
             term y big tri 0.5 0.75 1\n\
             rule IF x IS lo THEN y IS small\n\
             rule IF x IS hi THEN y IS big\n",
            "mem",
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn no_rule_fires_gives_zero_aggregate() {
        let base = parse_rule_text(
            "var x 0 1\nterm x band tri 0.4 0.5 0.6\n\
             var y 0 1\nterm y out tri 0 0.5 1\n\
             rule IF x IS band THEN y IS out\n",
            "mem",
        )
        .unwrap()
        .remove(0);
        let mut inputs = BTreeMap::new();
        inputs.insert("x", 0.0);
        let agg = base.infer(&inputs).unwrap();
        assert!(agg.values.iter().all(|&v| v == 0.0));
        let (crisp, flag) = defuzzify_centroid(&agg);
        assert!(flag);
        assert_relative_eq!(crisp, 0.5);
    }

    #[test]
    fn single_rule_full_fire_reproduces_consequent() {
        let base = tiny_base();
        let mut inputs = BTreeMap::new();
        inputs.insert("x", 0.0); // lo = 1, hi = 0
        let agg = base.infer(&inputs).unwrap();
        for i in 0..GRID_POINTS {
            let x = agg.grid_x(i);
            let expected = membership(
                &MembershipFn::Triangular {
                    a: 0.0,
                    b: 0.25,
                    c: 0.5,
                },
                x,
            );
            assert_relative_eq!(agg.values[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn aggregation_is_pointwise_max() {
        let base = tiny_base();
        let mut inputs = BTreeMap::new();
        inputs.insert("x", 0.5); // both rules fire partially
        let agg = base.infer(&inputs).unwrap();
        // Brute force over the grid: max of both clipped consequents.
        let lo_fire = (0.6 - 0.5) / 0.6;
        let hi_fire = (0.5 - 0.4) / 0.6;
        for i in 0..GRID_POINTS {
            let x = agg.grid_x(i);
            let small = membership(
                &MembershipFn::Triangular {
                    a: 0.0,
                    b: 0.25,
                    c: 0.5,
                },
                x,
            )
            .min(lo_fire);
            let big = membership(
                &MembershipFn::Triangular {
                    a: 0.5,
                    b: 0.75,
                    c: 1.0,
                },
                x,
            )
            .min(hi_fire);
            assert_relative_eq!(agg.values[i], small.max(big), epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_input_is_reported() {
        let base = tiny_base();
        let inputs = BTreeMap::new();
        match base.infer(&inputs) {
            Err(Error::MissingInput { variable }) => assert_eq!(variable, "x"),
            other => panic!("expected missing input, got {other:?}"),
        }
    }

    #[test]
    fn centroid_symmetry_examples() {
        // Fully fired symmetric triangle centred at 0.5.
        let mut agg = Aggregate {
            universe: (0.0, 1.0),
            values: [0.0; GRID_POINTS],
        };
        let tri = MembershipFn::Triangular {
            a: 0.0,
            b: 0.5,
            c: 1.0,
        };
        for i in 0..GRID_POINTS {
            agg.values[i] = membership(&tri, agg.grid_x(i));
        }
        let (c, flag) = defuzzify_centroid(&agg);
        assert!(!flag);
        assert_relative_eq!(c, 0.5, epsilon = 1e-12);

        // Rectangle over [0.2, 0.6].
        let mut rect = Aggregate {
            universe: (0.0, 1.0),
            values: [0.0; GRID_POINTS],
        };
        for i in 0..GRID_POINTS {
            let x = rect.grid_x(i);
            if (0.2..=0.6).contains(&x) {
                rect.values[i] = 1.0;
            }
        }
        let (c, _) = defuzzify_centroid(&rect);
        assert_relative_eq!(c, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn centroid_of_clipped_triangle_matches_hand_decomposition() {
        // tri(0, 0.2, 1) clipped at 0.5: rises to 0.5 at x = 0.1, plateau
        // to x = 0.6, then falls to zero at x = 1. All break points sit on
        // grid nodes, so the hand computation below sums the same discrete
        // values through independent arithmetic.
        let tri = MembershipFn::Triangular {
            a: 0.0,
            b: 0.2,
            c: 1.0,
        };
        let clip = 0.5;
        let mut agg = Aggregate {
            universe: (0.0, 1.0),
            values: [0.0; GRID_POINTS],
        };
        for i in 0..GRID_POINTS {
            agg.values[i] = membership(&tri, agg.grid_x(i)).min(clip);
        }
        let (c, _) = defuzzify_centroid(&agg);

        let h = 1.0 / (GRID_POINTS - 1) as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..GRID_POINTS {
            let x = i as f64 * h;
            // Piecewise form written out by hand.
            let mu = if x <= 0.1 {
                5.0 * x
            } else if x <= 0.6 {
                0.5
            } else {
                (1.0 - x) / 0.8
            };
            num += x * mu;
            den += mu;
        }
        assert_relative_eq!(c, num / den, epsilon = 1e-12);
        // And against the continuous trapezoid-decomposition centroid,
        // within the grid quadrature error.
        let area_rise = 0.5 * 0.1 * 0.5;
        let cx_rise = 2.0 / 3.0 * 0.1;
        let area_plateau = 0.5 * 0.5;
        let cx_plateau = 0.35;
        let area_fall = 0.5 * 0.4 * 0.5;
        let cx_fall = 0.6 + 0.4 / 3.0;
        let c_cont = (area_rise * cx_rise + area_plateau * cx_plateau + area_fall * cx_fall)
            / (area_rise + area_plateau + area_fall);
        assert_relative_eq!(c, c_cont, epsilon = 1e-3);
    }

    #[test]
    fn builtin_rules_parse() {
        let sys = FuzzySystem::builtin();
        assert_eq!(sys.layer1.rules.len(), 18);
        assert_eq!(sys.layer2_dq.rules.len(), 9);
        assert_eq!(sys.layer2_dqdot.rules.len(), 9);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "var x 0 1\nterm x lo tri 0.5 0.2 1\n";
        match parse_rule_text(bad, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let unknown = "var x 0 1\nterm x lo tri 0 0 1\nvar y 0 1\nterm y a tri 0 0 1\nrule IF z IS lo THEN y IS a\n";
        match parse_rule_text(unknown, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    fn setup() -> (FuzzySystem, crate::model::BipedModel, BipedState) {
        let model = build_model(&ModelConfig::default()).unwrap();
        let state = BipedState::standing(&model);
        (FuzzySystem::builtin(), model, state)
    }

    #[test]
    fn zero_push_is_exactly_neutral() {
        let (sys, model, state) = setup();
        for margin in [-0.09, -0.03, 0.0, 0.05] {
            let cmd = hierarchical_infer(&sys, 0.0, 0.0, margin, &state, &model).unwrap();
            assert_eq!(cmd.severity, 0.0);
            assert_eq!(cmd.delta_q, Vector6::zeros());
            assert_eq!(cmd.delta_qdot, Vector6::zeros());
        }
    }

    #[test]
    fn severity_monotone_in_force() {
        let (sys, model, state) = setup();
        let mut prev = -1.0;
        for step in 0..=50 {
            let force = step as f64;
            let cmd = hierarchical_infer(&sys, force, 0.0, 0.01, &state, &model).unwrap();
            assert!(
                cmd.severity >= prev - 1e-12,
                "severity dropped at {force} N: {} -> {}",
                prev,
                cmd.severity
            );
            prev = cmd.severity;
        }
        assert!(prev > 0.5, "strong pushes should be severe, got {prev}");
    }

    #[test]
    fn belongingness_orders_corrections() {
        let (sys, model, state) = setup();
        for force in [10.0, 20.0, 35.0, 50.0] {
            let cmd = hierarchical_infer(&sys, force, 0.0, -0.02, &state, &model).unwrap();
            let dq = cmd.delta_q;
            // Knee (belongingness 1.0) >= hip (0.8) >= ankle (0.5).
            assert!(dq[1].abs() >= dq[0].abs() - 1e-12);
            assert!(dq[0].abs() >= dq[2].abs() - 1e-12);
        }
    }

    #[test]
    fn backward_push_flips_sign() {
        let (sys, model, mut state) = setup();
        // Bend the knees so the lower stop does not clamp the negative
        // correction.
        state.q[1] = 0.9;
        state.q[4] = 0.9;
        let fwd = hierarchical_infer(&sys, 30.0, 0.0, -0.02, &state, &model).unwrap();
        let bwd =
            hierarchical_infer(&sys, 30.0, std::f64::consts::PI, -0.02, &state, &model).unwrap();
        assert!(fwd.delta_q[1] > 0.0);
        assert!(bwd.delta_q[1] < 0.0);
        assert_relative_eq!(fwd.delta_q[1], -bwd.delta_q[1], epsilon = 1e-12);
    }

    #[test]
    fn saturation_is_flagged() {
        let (sys, model, state) = setup();
        let cmd = hierarchical_infer(&sys, 80.0, 0.0, 0.01, &state, &model).unwrap();
        assert!(cmd.saturated);
        let cmd2 = hierarchical_infer(&sys, 10.0, 0.0, 0.01, &state, &model).unwrap();
        assert!(!cmd2.saturated);
    }

    #[test]
    fn corrections_respect_joint_limits() {
        let (sys, model, mut state) = setup();
        // Knees already deep in flexion: positive corrections must clamp.
        state.q[1] = 2.55;
        state.q[4] = 2.55;
        let cmd = hierarchical_infer(&sys, 45.0, 0.0, -0.06, &state, &model).unwrap();
        for j in JointId::ALL {
            let q = state.q[j as usize] + cmd.delta_q[j as usize];
            let lim = model.joint(j);
            assert!(q >= lim.min - 1e-12 && q <= lim.max + 1e-12);
        }
    }

    #[test]
    fn determinism() {
        let (sys, model, state) = setup();
        let a = hierarchical_infer(&sys, 17.3, 0.4, -0.012, &state, &model).unwrap();
        let b = hierarchical_infer(&sys, 17.3, 0.4, -0.012, &state, &model).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn membership_in_unit_interval(x in -10.0f64..10.0, a in -1.0f64..1.0, w1 in 0.0f64..2.0, w2 in 0.0f64..2.0) {
            let tri = MembershipFn::Triangular { a, b: a + w1, c: a + w1 + w2 };
            if tri.validate().is_ok() {
                let m = membership(&tri, x);
                prop_assert!((0.0..=1.0).contains(&m));
            }
        }

        #[test]
        fn ifs_components_partition_unity(x in -2.0f64..2.0, h in 0.0f64..0.99) {
            let mf = MembershipFn::Trapezoidal { a: -1.0, b: -0.2, c: 0.3, d: 1.2 };
            let d = ifs_degree(&mf, x, h);
            prop_assert!(d.mu >= 0.0 && d.nu >= 0.0 && d.pi >= 0.0);
            prop_assert!((d.mu + d.nu + d.pi - 1.0).abs() < 1e-12);
        }

        #[test]
        fn defuzzified_value_inside_universe(fire1 in 0.0f64..1.0, fire2 in 0.0f64..1.0) {
            let tri1 = MembershipFn::Triangular { a: 0.0, b: 0.2, c: 0.5 };
            let tri2 = MembershipFn::Triangular { a: 0.4, b: 0.8, c: 1.0 };
            let mut agg = Aggregate { universe: (0.0, 1.0), values: [0.0; GRID_POINTS] };
            for i in 0..GRID_POINTS {
                let x = agg.grid_x(i);
                agg.values[i] = membership(&tri1, x).min(fire1).max(membership(&tri2, x).min(fire2));
            }
            let (c, _) = defuzzify_centroid(&agg);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
