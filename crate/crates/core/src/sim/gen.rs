//! Seeded generator of synthetic app models.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::builder::{ModelBuilder, SupergraphBuilder};
use super::fixtures::{INVOKE, START_ACTIVITY};
use crate::graph::{AppModel, Edge, EdgeKind, NodeId};

/// Privacy-relevant framework APIs the generator logs.
pub const LOGGED_POOL: &[&str] = &[
    "android.telephony.TelephonyManager.getDeviceId()Ljava/lang/String;",
    "android.telephony.TelephonyManager.getLine1Number()Ljava/lang/String;",
    "android.telephony.TelephonyManager.getSubscriberId()Ljava/lang/String;",
    "android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V",
    "android.location.LocationManager.getLastKnownLocation(Ljava/lang/String;)Landroid/location/Location;",
    "android.content.ContentResolver.query(Landroid/net/Uri;[Ljava/lang/String;Ljava/lang/String;[Ljava/lang/String;Ljava/lang/String;)Landroid/database/Cursor;",
    "java.net.URL.openConnection()Ljava/net/URLConnection;",
    "org.apache.http.client.HttpClient.execute(Lorg/apache/http/client/methods/HttpUriRequest;)Lorg/apache/http/HttpResponse;",
];

/// Framework APIs that never produce records.
pub const UNLOGGED_POOL: &[&str] = &[
    "java.lang.String.length()I",
    "java.lang.StringBuilder.append(Ljava/lang/String;)Ljava/lang/StringBuilder;",
    "android.util.Log.d(Ljava/lang/String;Ljava/lang/String;)I",
    "java.util.ArrayList.add(Ljava/lang/Object;)Z",
    "android.view.View.setVisibility(I)V",
];

const CALLBACK_METHODS: &[&str] = &[
    "onCreate(Landroid/os/Bundle;)V",
    "onClick(Landroid/view/View;)V",
    "onResume()V",
    "onReceive(Landroid/content/Context;Landroid/content/Intent;)V",
    "onStartCommand(Landroid/content/Intent;II)I",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub node_budget: usize,
    /// Share of nodes with at least two distinct successors.
    pub branch_fraction: f64,
    /// Share of ordinary framework call sites whose API is logged.
    pub logged_density: f64,
    /// Share of app-method invocations made through reflection.
    pub reflective_fraction: f64,
    /// Number of inter-component call sites.
    pub icc_links: usize,
    pub max_call_depth: usize,
    pub callbacks: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            node_budget: 500,
            branch_fraction: 0.2,
            logged_density: 0.1,
            reflective_fraction: 0.3,
            icc_links: 0,
            max_call_depth: 4,
            callbacks: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("cannot reach branch fraction {requested:.3} (closest {achieved:.3})")]
    BranchFraction { requested: f64, achieved: f64 },
    #[error("cannot reach node budget {requested} (got {achieved})")]
    NodeBudget { requested: usize, achieved: usize },
}

/// Share of nodes with at least two distinct successors.
pub fn branch_fraction(model: &AppModel) -> f64 {
    let n = model.node_count();
    if n == 0 {
        0.0
    } else {
        model.branch_node_count() as f64 / n as f64
    }
}

/// Generate a model. The conditional rate is tuned by bisection with the
/// same seed until the realized branch fraction is within 0.05 of the
/// request.
pub fn generate_app(p: &GenParams) -> Result<AppModel, GenError> {
    check(p)?;
    let calls_wanted = p.branch_fraction > 0.0 || p.reflective_fraction > 0.0;
    if p.max_call_depth == 0 && calls_wanted {
        return Err(GenError::Invalid(
            "max_call_depth = 0 leaves no room for the requested calls".into(),
        ));
    }
    let attempt = |knob: f64| {
        let m = build(p, knob);
        let f = branch_fraction(&m);
        (m, f)
    };
    let (mut best, mut best_f) = attempt(0.0);
    if p.branch_fraction > 0.0 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..18 {
            if (best_f - p.branch_fraction).abs() <= 0.01 {
                break;
            }
            let mid = (lo + hi) / 2.0;
            let (m, f) = attempt(mid);
            if (f - p.branch_fraction).abs() < (best_f - p.branch_fraction).abs() {
                best = m;
                best_f = f;
            }
            if f < p.branch_fraction {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if (best_f - p.branch_fraction).abs() > 0.05 {
        return Err(GenError::BranchFraction {
            requested: p.branch_fraction,
            achieved: best_f,
        });
    }
    let n = best.node_count();
    if (n as f64 - p.node_budget as f64).abs() > 0.1 * p.node_budget as f64 {
        return Err(GenError::NodeBudget {
            requested: p.node_budget,
            achieved: n,
        });
    }
    Ok(best)
}

fn check(p: &GenParams) -> Result<(), GenError> {
    for (name, v) in [
        ("branch_fraction", p.branch_fraction),
        ("logged_density", p.logged_density),
        ("reflective_fraction", p.reflective_fraction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(GenError::Invalid(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    if p.node_budget == 0 || p.callbacks == 0 {
        return Err(GenError::Invalid("node_budget and callbacks must be positive".into()));
    }
    if p.node_budget < 2 * p.callbacks {
        return Err(GenError::Invalid(format!(
            "node_budget {} cannot hold {} callbacks",
            p.node_budget, p.callbacks
        )));
    }
    if p.icc_links > 0 && p.callbacks < 2 {
        return Err(GenError::Invalid("icc links need at least two callbacks".into()));
    }
    Ok(())
}

/// Unit declaring callback `j`.
pub fn component(j: usize) -> String {
    format!("com.gen.app.C{j}")
}

pub fn callback_signature(j: usize) -> String {
    format!("{}.{}", component(j), CALLBACK_METHODS[j % CALLBACK_METHODS.len()])
}

fn build(p: &GenParams, knob: f64) -> AppModel {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut mb = ModelBuilder::new();
    for api in LOGGED_POOL.iter().chain([&INVOKE, &START_ACTIVITY]) {
        mb.logged(api);
    }
    let mut icc_left = p.icc_links;
    let mut icc_sites: Vec<(NodeId, usize)> = Vec::new();
    let mut entries = Vec::with_capacity(p.callbacks);
    for j in 0..p.callbacks {
        let share = p.node_budget / p.callbacks + usize::from(j < p.node_budget % p.callbacks);
        let icc_here = icc_left / (p.callbacks - j);
        icc_left -= icc_here;
        let cb = callback_signature(j);
        let mut g = mb.supergraph(&cb);
        let mut gen = Gen {
            p,
            rng: &mut rng,
            knob,
            budget: share,
            unit: component(j),
            methods: 0,
            helpers: HashMap::new(),
            icc_left: icc_here,
            icc_sites: Vec::new(),
        };
        let entry = gen.method(&mut g, &cb, 1, usize::MAX, true);
        entries.push(entry);
        for site in std::mem::take(&mut gen.icc_sites) {
            icc_sites.push((site, j));
        }
        g.finish();
    }
    for (site, j) in icc_sites {
        let mut others: Vec<usize> = (0..p.callbacks).filter(|&o| o != j).collect();
        others.shuffle(&mut rng);
        for &o in others.iter().take(2) {
            mb.deferred_edge(Edge::new(site, entries[o], EdgeKind::CallEnter));
        }
    }
    mb.build()
}

struct Stmt {
    first: NodeId,
    lasts: Vec<NodeId>,
}

struct Gen<'a> {
    p: &'a GenParams,
    rng: &'a mut ChaCha8Rng,
    knob: f64,
    budget: usize,
    unit: String,
    methods: usize,
    helpers: HashMap<(usize, u8), String>,
    icc_left: usize,
    icc_sites: Vec<NodeId>,
}

impl Gen<'_> {
    fn left(&self, g: &SupergraphBuilder<'_>) -> usize {
        self.budget.saturating_sub(g.len())
    }

    /// Entry, a body of about `quota` nodes, exit. Returns the entry id.
    fn method(
        &mut self,
        g: &mut SupergraphBuilder<'_>,
        sig: &str,
        depth: usize,
        quota: usize,
        root: bool,
    ) -> NodeId {
        let entry = g.entry(sig);
        let body = self.block(g, sig, depth, quota, 0, root);
        let exit = g.exit(sig);
        let mut lasts = vec![entry];
        for s in body {
            for l in lasts {
                g.flow(l, s.first);
            }
            lasts = s.lasts;
        }
        if root {
            // place any icc sites the body did not reach
            while self.icc_left > 0 {
                let s = self.icc(g, sig);
                for l in lasts {
                    g.flow(l, s.first);
                }
                lasts = s.lasts;
            }
        }
        for l in lasts {
            g.flow(l, exit);
        }
        entry
    }

    fn block(
        &mut self,
        g: &mut SupergraphBuilder<'_>,
        m: &str,
        depth: usize,
        quota: usize,
        nest: usize,
        root: bool,
    ) -> Vec<Stmt> {
        let start = g.len();
        let mut out = Vec::new();
        // one node stays reserved for the method exit
        while g.len() - start < quota && self.left(g) > 1 {
            if root && self.icc_left > 0 && self.rng.gen_bool(0.2) {
                out.push(self.icc(g, m));
                continue;
            }
            out.push(self.statement(g, m, depth, nest));
        }
        out
    }

    fn statement(&mut self, g: &mut SupergraphBuilder<'_>, m: &str, depth: usize, nest: usize) -> Stmt {
        let p_cond = 0.9 * self.knob;
        let calls = depth < self.p.max_call_depth
            && (self.p.reflective_fraction > 0.0 || self.p.branch_fraction > 0.0);
        let p_call = if calls { 0.2 } else { 0.0 };
        let r: f64 = self.rng.gen();
        if nest < 3 && r < p_cond && self.left(g) >= 4 {
            return self.conditional(g, m, depth, nest);
        }
        if r < p_cond + p_call && self.left(g) >= 5 {
            return self.app_call(g, m, depth);
        }
        let id = if self.rng.gen_bool(0.6) {
            if self.rng.gen_bool(self.p.logged_density) {
                let api = *LOGGED_POOL.choose(self.rng).expect("pool");
                g.call_framework(m, api, &display_call(api))
            } else {
                let api = *UNLOGGED_POOL.choose(self.rng).expect("pool");
                g.call_framework(m, api, &display_call(api))
            }
        } else {
            let n = self.rng.gen_range(0..1000);
            g.plain(m, &format!("r{n} = r{} + {n}", n / 2))
        };
        Stmt {
            first: id,
            lasts: vec![id],
        }
    }

    fn new_method(&mut self) -> String {
        self.methods += 1;
        format!("{}.m{}()V", self.unit, self.methods)
    }

    fn app_call(&mut self, g: &mut SupergraphBuilder<'_>, m: &str, depth: usize) -> Stmt {
        let callee = self.new_method();
        let statically = self.p.branch_fraction > 0.0 && !self.rng.gen_bool(self.p.reflective_fraction);
        let site = if statically {
            g.call_app(m, &callee)
        } else {
            g.reflective(m, INVOKE, "Object r = method.invoke(receiver, args)")
        };
        let cap = (self.left(g) / 3).clamp(1, 40);
        let quota = self.rng.gen_range(1..=cap);
        self.method(g, &callee, depth + 1, quota, false);
        Stmt {
            first: site,
            lasts: vec![site],
        }
    }

    /// Method whose only statement calls logged API `api`; `variant`
    /// distinguishes otherwise identical helpers.
    fn helper(&mut self, g: &mut SupergraphBuilder<'_>, api: usize, variant: u8) -> String {
        if let Some(s) = self.helpers.get(&(api, variant)) {
            return s.clone();
        }
        let sig = format!("{}.h{api}v{variant}()V", self.unit);
        let e = g.entry(&sig);
        let c = g.call_framework(&sig, LOGGED_POOL[api], &display_call(LOGGED_POOL[api]));
        let x = g.exit(&sig);
        g.chain(&[e, c, x]);
        self.helpers.insert((api, variant), sig.clone());
        sig
    }

    fn conditional(&mut self, g: &mut SupergraphBuilder<'_>, m: &str, depth: usize, nest: usize) -> Stmt {
        let n = self.rng.gen_range(0..100);
        let b = g.branch(m, &format!("if (r{n} > {})", n * 3));
        let x = self.rng.gen_range(0..LOGGED_POOL.len());
        let helpers_ok = depth < self.p.max_call_depth;
        let u: f64 = self.rng.gen();
        // arm heads always differ in what the next record shows
        let heads: [Head; 2] = if helpers_ok && u < 0.4 {
            [Head::Direct(x), Head::Helper(x, 0)]
        } else if helpers_ok && u < 0.7 {
            [Head::Helper(x, 0), Head::Helper(x, 1)]
        } else {
            let y = (x + self.rng.gen_range(1..LOGGED_POOL.len())) % LOGGED_POOL.len();
            [Head::Direct(x), Head::Direct(y)]
        };
        let mut heads = heads.to_vec();
        heads.shuffle(self.rng);
        let mut lasts = Vec::new();
        for h in heads {
            let head = match h {
                Head::Direct(a) => g.call_framework(m, LOGGED_POOL[a], &display_call(LOGGED_POOL[a])),
                Head::Helper(a, v) => {
                    let sig = self.helper(g, a, v);
                    g.call_app(m, &sig)
                }
            };
            g.flow(b, head);
            let mut arm_lasts = vec![head];
            if self.rng.gen_bool(0.5 * (1.0 - self.knob)) {
                let quota = self.rng.gen_range(1..=3);
                for s in self.block(g, m, depth, quota, nest + 1, false) {
                    for l in arm_lasts {
                        g.flow(l, s.first);
                    }
                    arm_lasts = s.lasts;
                }
            }
            lasts.extend(arm_lasts);
        }
        Stmt { first: b, lasts }
    }

    fn icc(&mut self, g: &mut SupergraphBuilder<'_>, m: &str) -> Stmt {
        self.icc_left -= 1;
        let id = g.icc(m, START_ACTIVITY, "startActivity(new Intent(this, target))");
        self.icc_sites.push(id);
        Stmt {
            first: id,
            lasts: vec![id],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Head {
    Direct(usize),
    Helper(usize, u8),
}

fn display_call(api: &str) -> String {
    let name = api.split('(').next().unwrap_or(api);
    let short = name.rsplit('.').take(2).collect::<Vec<_>>();
    format!("{}.{}(...)", short.get(1).unwrap_or(&""), short[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{to_json, validate, CalleeRef, StatementKind};

    fn params(node_budget: usize, branch_fraction: f64, reflective_fraction: f64) -> GenParams {
        GenParams {
            node_budget,
            branch_fraction,
            reflective_fraction,
            ..GenParams::default()
        }
    }

    #[test]
    fn straight_line() {
        let p = GenParams {
            callbacks: 1,
            ..params(10, 0.0, 0.0)
        };
        let m = generate_app(&p).unwrap();
        assert_eq!(m.node_count(), 10);
        assert_eq!(m.branch_node_count(), 0);
        let g = &m.supergraphs()[0];
        assert_eq!(g.methods().count(), 1);
        assert!(g.nodes().iter().all(|n| !matches!(n.statement.kind, StatementKind::Branch { .. })));
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = GenParams {
            icc_links: 2,
            ..params(700, 0.3, 0.5)
        };
        let a = to_json(&generate_app(&p).unwrap());
        let b = to_json(&generate_app(&p).unwrap());
        assert_eq!(a, b);
        let c = to_json(&generate_app(&GenParams { seed: 1, ..p }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn realized_shape_is_within_tolerance() {
        for (i, (n, b, r)) in [(500, 0.1, 0.0), (1500, 0.3, 0.5), (3000, 0.5, 0.9)].into_iter().enumerate() {
            let p = GenParams {
                seed: i as u64,
                icc_links: i,
                ..params(n, b, r)
            };
            let m = generate_app(&p).unwrap();
            assert!(validate(&m).is_empty(), "{:?}", validate(&m));
            assert!((branch_fraction(&m) - b).abs() <= 0.05);
            assert!((m.node_count() as f64 - n as f64).abs() <= 0.1 * n as f64);
        }
    }

    #[test]
    fn all_reflective_model_has_no_static_app_calls() {
        let m = generate_app(&params(800, 0.0, 1.0)).unwrap();
        let statics = m
            .supergraphs()
            .iter()
            .flat_map(|g| g.nodes())
            .filter(|n| matches!(n.statement.callee(), Some(CalleeRef::Static(_))))
            .count();
        assert_eq!(statics, 0);
        assert_eq!(m.branch_node_count(), 0);
    }

    #[test]
    fn infeasible_requests_are_errors() {
        let flat = GenParams {
            max_call_depth: 0,
            ..params(500, 0.2, 0.0)
        };
        assert!(matches!(generate_app(&flat), Err(GenError::Invalid(_))));
        assert!(matches!(generate_app(&params(500, 1.5, 0.0)), Err(GenError::Invalid(_))));
        let lonely = GenParams {
            callbacks: 1,
            icc_links: 1,
            ..params(500, 0.2, 0.0)
        };
        assert!(matches!(generate_app(&lonely), Err(GenError::Invalid(_))));
        assert!(matches!(
            generate_app(&params(500, 0.95, 0.0)),
            Err(GenError::BranchFraction { .. })
        ));
    }
}
