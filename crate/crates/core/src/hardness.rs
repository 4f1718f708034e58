//! Euclidean k-means instances built from Exact Cover by 3-Sets.
//!
//! Every X3C set becomes a row of weighted points that can be paired in two
//! ways (A or B). Between consecutive rows sit connector points whose cheap
//! placements depend on the set memberships, so a clustering reaching the cost
//! threshold exists exactly when the X3C instance has an exact cover.
//!
//! Indices in [`Role`] are zero-based; the textual tags (`r_1_3`, `x'_2_1`)
//! are one-based.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cluster_cost, cost_delta_add, kmeans_cost, Clustering, Instance, Point};
use crate::margin::{centroids, cluster_ratios, max_margin};

/// Elements are `1..=3m`; every set has exactly three distinct elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawX3c")]
pub struct X3cInstance {
    m: usize,
    sets: Vec<[usize; 3]>,
}

#[derive(Deserialize)]
struct RawX3c {
    m: usize,
    sets: Vec<Vec<usize>>,
}

impl TryFrom<RawX3c> for X3cInstance {
    type Error = Error;

    fn try_from(raw: RawX3c) -> Result<Self> {
        make_x3c(raw.m, raw.sets)
    }
}

pub fn make_x3c(m: usize, sets: Vec<Vec<usize>>) -> Result<X3cInstance> {
    if m == 0 {
        return Err(Error::InvalidX3c("m must be positive".into()));
    }
    if sets.is_empty() {
        return Err(Error::InvalidX3c("at least one set is required".into()));
    }
    let mut out = Vec::with_capacity(sets.len());
    for (i, s) in sets.into_iter().enumerate() {
        let distinct: BTreeSet<usize> = s.iter().copied().collect();
        if s.len() != 3 || distinct.len() != 3 {
            return Err(Error::InvalidX3c(format!("set {} must hold three distinct elements", i + 1)));
        }
        if let Some(&e) = distinct.iter().find(|&&e| e == 0 || e > 3 * m) {
            return Err(Error::InvalidX3c(format!("element {e} of set {} outside 1..={}", i + 1, 3 * m)));
        }
        let v: Vec<usize> = distinct.into_iter().collect();
        out.push([v[0], v[1], v[2]]);
    }
    Ok(X3cInstance { m, sets: out })
}

impl X3cInstance {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of sets, `l`.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[[usize; 3]] {
        &self.sets
    }

    /// Whether one-based `element` belongs to set `row` (zero-based).
    pub fn contains(&self, row: usize, element: usize) -> bool {
        self.sets[row].contains(&element)
    }

    /// Whether the zero-based rows form an exact cover.
    pub fn is_exact_cover(&self, rows: &[usize]) -> bool {
        if rows.len() != self.m || rows.iter().any(|&r| r >= self.len()) {
            return false;
        }
        let mut seen = vec![false; 3 * self.m + 1];
        for &r in rows {
            for &e in &self.sets[r] {
                if seen[e] {
                    return false;
                }
                seen[e] = true;
            }
        }
        seen[1..].iter().all(|&s| s)
    }

    /// JSON-facing form with plain vectors.
    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        self.sets.iter().map(|s| s.to_vec()).collect()
    }
}

/// What a location of the reduced instance stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Left end of row `row`.
    Start { row: usize },
    /// Interior bullet `t` of a row, `t ∈ 0..=6m`.
    Bullet { row: usize, t: usize },
    /// Right end of a row.
    Finish { row: usize },
    /// Connector hub between rows `row` and `row + 1` in column `col`.
    Gap { row: usize, col: usize },
    /// Connector just below row `row`; primed when `col + 1 ∈ S_row`.
    Lower { row: usize, col: usize, primed: bool },
    /// Connector just above row `row + 1`; primed when `col + 1 ∈ S_{row+1}`.
    Upper { row: usize, col: usize, primed: bool },
}

impl Role {
    pub fn is_connector(self) -> bool {
        matches!(self, Role::Lower { .. } | Role::Upper { .. })
    }

    pub fn is_row_point(self) -> bool {
        matches!(self, Role::Start { .. } | Role::Bullet { .. } | Role::Finish { .. })
    }

    /// Row that holds this point, for row points.
    pub fn row(self) -> Option<usize> {
        match self {
            Role::Start { row } | Role::Bullet { row, .. } | Role::Finish { row } => Some(row),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = |primed: bool| if primed { "'" } else { "" };
        match *self {
            Role::Start { row } => write!(f, "s_{}", row + 1),
            Role::Bullet { row, t } => write!(f, "r_{}_{}", row + 1, t + 1),
            Role::Finish { row } => write!(f, "f_{}", row + 1),
            Role::Gap { row, col } => write!(f, "g_{}_{}", row + 1, col + 1),
            Role::Lower { row, col, primed } => write!(f, "x{}_{}_{}", p(primed), row + 1, col + 1),
            Role::Upper { row, col, primed } => write!(f, "y{}_{}_{}", p(primed), row + 1, col + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayoutConstants {
    pub h: f64,
    pub d: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Vertical distance between consecutive rows.
    pub row_gap: f64,
    /// Horizontal offset of each hub from the bullet above its lower connector.
    pub hub_offset: f64,
}

impl LayoutConstants {
    pub fn new(w: u64) -> Result<Self> {
        let w = w as f64;
        let h = 5f64.sqrt();
        let d = 6f64.sqrt();
        let lambda = 2.0 * h / 3f64.sqrt();
        let (row_gap, hub_offset) = solve_hub(h, lambda)?;
        Ok(Self {
            h,
            d,
            epsilon: 1.0 / (w * w),
            lambda,
            alpha: d / w - 1.0 / (2.0 * w * w * w),
            row_gap,
            hub_offset,
        })
    }

    pub fn depth(&self) -> f64 {
        (self.h * self.h - 1.0).sqrt()
    }
}

/// Places the hub `(a, −u)` relative to the bullet above the unprimed
/// connector `(0, −p)` so it is at distance λ from both connector candidates
/// `(0, −p)` and `(1, −h)`; mirror symmetry about `−u` covers the upper pair.
/// Returns `(2u, a)` for the larger root.
fn solve_hub(h: f64, lambda: f64) -> Result<(f64, f64)> {
    let p = (h * h - 1.0).sqrt();
    // Equal distances give a = c0 + c1·u.
    let c0 = (1.0 + h * h - p * p) / 2.0;
    let c1 = -(h - p);
    let qa = c1 * c1 + 1.0;
    let qb = 2.0 * c0 * c1 - 2.0 * p;
    let qc = c0 * c0 + p * p - lambda * lambda;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::NoLayout);
    }
    let u = (-qb + disc.sqrt()) / (2.0 * qa);
    if u <= h {
        return Err(Error::NoLayout);
    }
    Ok((2.0 * u, c0 + c1 * u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    A,
    B,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub x3c: X3cInstance,
    pub w: u64,
    pub instance: Instance,
    /// Number of clusters.
    pub k: usize,
    /// Cost of any nice clustering with exactly `m` A-rows.
    pub threshold: f64,
    /// `(6m+3)wl + 3m(l−1)w − mα`, kept for comparison with `threshold`.
    pub threshold_closed_form: f64,
    pub roles: Vec<Role>,
    pub constants: LayoutConstants,
    index: HashMap<Role, usize>,
}

pub fn build_reduction(x3c: &X3cInstance, w: u64) -> Result<Reduction> {
    if w < 2 {
        return Err(Error::InvalidParameter(format!("weight must be at least 2, got {w}")));
    }
    let c = LayoutConstants::new(w)?;
    let (m, l) = (x3c.m(), x3c.len());
    let depth = c.depth();
    let row_y = |i: usize| -(i as f64) * c.row_gap;
    // Abscissa of bullet r_{2j} (one-based), the column's center.
    let col_x = |j: usize| c.d + 4.0 * j as f64 + 2.0;

    let mut roles = Vec::new();
    let mut coords = Vec::new();
    for i in 0..l {
        let y = row_y(i);
        roles.push(Role::Start { row: i });
        coords.push([0.0, y]);
        for t in 0..=6 * m {
            roles.push(Role::Bullet { row: i, t });
            coords.push([c.d + 2.0 * t as f64, y]);
        }
        roles.push(Role::Finish { row: i });
        coords.push([2.0 * c.d + 12.0 * m as f64 - c.epsilon, y]);
        if i + 1 == l {
            break;
        }
        let below = row_y(i + 1);
        for j in 0..3 * m {
            let cx = col_x(j);
            roles.push(Role::Gap { row: i, col: j });
            coords.push([cx + c.hub_offset, y - c.row_gap / 2.0]);

            let primed = x3c.contains(i, j + 1);
            roles.push(Role::Lower { row: i, col: j, primed });
            coords.push(if primed { [cx + 1.0, y - c.h] } else { [cx, y - depth] });

            let primed = x3c.contains(i + 1, j + 1);
            roles.push(Role::Upper { row: i, col: j, primed });
            coords.push(if primed { [cx + 1.0, below + c.h] } else { [cx, below + depth] });
        }
    }
    let wf = w as f64;
    let points = coords.into_iter().map(|p| Point::new(p.to_vec())).collect::<Vec<_>>();
    let instance = Instance::with_weights(points, vec![wf; roles.len()])?;
    let index = roles.iter().enumerate().map(|(i, &r)| (r, i)).collect();

    let (mf, lf) = (m as f64, l as f64);
    let row_total = lf * (6.0 * mf + 3.0) * wf;
    let connector_total = 6.0 * mf * (lf - 1.0) * (2.0 / 3.0) * wf * c.h * c.h;
    Ok(Reduction {
        x3c: x3c.clone(),
        w,
        instance,
        k: (l - 1) * 3 * m + l * (3 * m + 2),
        threshold: row_total - mf * c.alpha + connector_total,
        threshold_closed_form: row_total + 3.0 * mf * (lf - 1.0) * wf - mf * c.alpha,
        roles,
        constants: c,
        index,
    })
}

/// Where a connector point is placed in a nice clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Host {
    Gap,
    /// The row pair of the adjacent row in the connector's column.
    Row,
}

#[derive(Debug, Clone)]
pub struct NiceClustering {
    pub clustering: Clustering,
    pub rows: Vec<RowKind>,
    /// `(point index, host)` for every connector point.
    pub hosts: Vec<(usize, Host)>,
}

impl NiceClustering {
    pub fn a_rows(&self) -> usize {
        self.rows.iter().filter(|&&r| r == RowKind::A).count()
    }
}

impl Reduction {
    pub fn index_of(&self, role: Role) -> Option<usize> {
        self.index.get(&role).copied()
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn rows(&self) -> usize {
        self.x3c.len()
    }

    pub fn columns(&self) -> usize {
        3 * self.x3c.m()
    }

    /// Bullets per row.
    fn bullets(&self) -> usize {
        6 * self.x3c.m() + 1
    }

    /// Expected cost of one row under `kind`.
    pub fn row_cost(&self, kind: RowKind) -> f64 {
        let base = (6 * self.x3c.m() + 3) as f64 * self.w as f64;
        match kind {
            RowKind::A => base - self.constants.alpha,
            RowKind::B => base,
        }
    }

    /// Cost added by a connector point joining a cluster that is good for it.
    pub fn good_increment(&self) -> f64 {
        2.0 / 3.0 * self.w as f64 * self.constants.h * self.constants.h
    }

    fn bullet(&self, row: usize, t: usize) -> usize {
        self.index[&Role::Bullet { row, t }]
    }

    /// Point groups of a row under `kind`, left to right.
    pub fn row_groups(&self, row: usize, kind: RowKind) -> Vec<Vec<usize>> {
        let s = self.index[&Role::Start { row }];
        let f = self.index[&Role::Finish { row }];
        let nb = self.bullets();
        let mut out = Vec::with_capacity(self.columns() + 2);
        match kind {
            RowKind::A => {
                out.push(vec![s]);
                for j in 0..self.columns() {
                    out.push(vec![self.bullet(row, 2 * j), self.bullet(row, 2 * j + 1)]);
                }
                out.push(vec![self.bullet(row, nb - 1), f]);
            }
            RowKind::B => {
                out.push(vec![s, self.bullet(row, 0)]);
                for j in 0..self.columns() {
                    out.push(vec![self.bullet(row, 2 * j + 1), self.bullet(row, 2 * j + 2)]);
                }
                out.push(vec![f]);
            }
        }
        out
    }

    /// The row pair of column `col`: group `col + 1` of [`Reduction::row_groups`].
    pub fn column_pair(&self, row: usize, col: usize, kind: RowKind) -> [usize; 2] {
        let j = col;
        match kind {
            RowKind::A => [self.bullet(row, 2 * j), self.bullet(row, 2 * j + 1)],
            RowKind::B => [self.bullet(row, 2 * j + 1), self.bullet(row, 2 * j + 2)],
        }
    }

    /// Row adjacent to a connector and whether it is primed.
    fn connector_side(role: Role) -> Option<(usize, usize, usize, bool)> {
        match role {
            Role::Lower { row, col, primed } => Some((row, col, row, primed)),
            Role::Upper { row, col, primed } => Some((row, col, row + 1, primed)),
            _ => None,
        }
    }

    /// Builds the nice clustering with the given row kinds, placing connectors
    /// by a per-column bipartite matching.
    pub fn nice_clustering(&self, rows: &[RowKind]) -> Result<NiceClustering> {
        let l = self.rows();
        if rows.len() != l {
            return Err(Error::LabelCount { expected: l, got: rows.len() });
        }
        let mut parts: Vec<Vec<usize>> = Vec::new();
        let mut slot = HashMap::new();
        for (i, &kind) in rows.iter().enumerate() {
            for (g, group) in self.row_groups(i, kind).into_iter().enumerate() {
                if (1..=self.columns()).contains(&g) {
                    slot.insert((i, g - 1), parts.len());
                }
                parts.push(group);
            }
        }
        let mut hub_part = HashMap::new();
        for i in 0..l.saturating_sub(1) {
            for j in 0..self.columns() {
                hub_part.insert((i, j), parts.len());
                parts.push(vec![self.index[&Role::Gap { row: i, col: j }]]);
            }
        }

        let mut hosts = Vec::new();
        for j in 0..self.columns() {
            let assignment = self.match_column(j, rows).ok_or(Error::NotRealizable { column: j + 1 })?;
            for (z, host) in assignment {
                let (zrow, _, adj, _) = Self::connector_side(self.roles[z]).expect("connector");
                let part = match host {
                    Host::Gap => hub_part[&(zrow, j)],
                    Host::Row => slot[&(adj, j)],
                };
                parts[part].push(z);
                hosts.push((z, host));
            }
        }
        hosts.sort_unstable();
        let clustering = Clustering::from_parts(&parts, self.instance.len())?;
        debug_assert_eq!(clustering.k(), self.k);
        Ok(NiceClustering { clustering, rows: rows.to_vec(), hosts })
    }

    /// Whether the row pair of `row` under `kind` is good for a connector.
    fn row_pair_is_good(kind: RowKind, primed: bool) -> bool {
        kind == RowKind::B || !primed
    }

    /// Kuhn's augmenting paths over one column.
    fn match_column(&self, col: usize, rows: &[RowKind]) -> Option<Vec<(usize, Host)>> {
        let l = rows.len();
        // Resources: hubs 0..l-1, then row slots l-1..2l-1.
        let hub = |i: usize| i;
        let row_slot = |r: usize| l - 1 + r;
        let mut left = Vec::new();
        let mut edges = Vec::new();
        for i in 0..l.saturating_sub(1) {
            for role in [
                Role::Lower { row: i, col, primed: self.x3c.contains(i, col + 1) },
                Role::Upper { row: i, col, primed: self.x3c.contains(i + 1, col + 1) },
            ] {
                let (_, _, adj, primed) = Self::connector_side(role).expect("connector");
                let mut e = Vec::new();
                if Self::row_pair_is_good(rows[adj], primed) {
                    e.push(row_slot(adj));
                }
                e.push(hub(i));
                left.push(self.index[&role]);
                edges.push(e);
            }
        }
        let mut owner: Vec<Option<usize>> = vec![None; 2 * l - 1];
        for z in 0..left.len() {
            let mut visited = vec![false; owner.len()];
            if !augment(z, &edges, &mut owner, &mut visited) {
                return None;
            }
        }
        let mut out = Vec::with_capacity(left.len());
        for (res, o) in owner.iter().enumerate() {
            if let Some(z) = *o {
                out.push((left[z], if res < l - 1 { Host::Gap } else { Host::Row }));
            }
        }
        Some(out)
    }
}

fn augment(z: usize, edges: &[Vec<usize>], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
    for &r in &edges[z] {
        if visited[r] {
            continue;
        }
        visited[r] = true;
        if owner[r].is_none_or(|other| augment(other, edges, owner, visited)) {
            owner[r] = Some(z);
            return true;
        }
    }
    false
}

impl Reduction {
    pub fn is_primed(&self, p: usize) -> bool {
        matches!(self.roles[p], Role::Lower { primed: true, .. } | Role::Upper { primed: true, .. })
    }

    /// Margin ratio an isolated bullet pair must show in `nice`.
    fn e_ratio(&self, pair: &[usize], nice: &NiceClustering) -> f64 {
        let Role::Bullet { row, t } = self.roles[pair[0]].min(self.roles[pair[1]]) else {
            return f64::NAN;
        };
        let kind = nice.rows[row];
        let col = if kind == RowKind::A { t / 2 } else { (t.saturating_sub(1)) / 2 };
        let mut neighbors = Vec::new();
        if row + 1 < self.rows() {
            neighbors.push(Role::Lower { row, col, primed: self.x3c.contains(row, col + 1) });
        }
        if row > 0 {
            neighbors.push(Role::Upper { row: row - 1, col, primed: self.x3c.contains(row, col + 1) });
        }
        let close = neighbors.iter().any(|&n| match n {
            Role::Lower { primed, .. } | Role::Upper { primed, .. } => kind == RowKind::B || !primed,
            _ => false,
        });
        if close {
            self.constants.h
        } else {
            3.0
        }
    }
}

/// Nice clustering with the rows of an exact cover A-clustered.
pub fn canonical_nice_clustering(red: &Reduction, cover: &[usize]) -> Result<NiceClustering> {
    if !red.x3c.is_exact_cover(cover) {
        return Err(Error::NotExactCover(cover.iter().map(|r| r + 1).collect()));
    }
    let rows: Vec<RowKind> = (0..red.rows())
        .map(|i| if cover.contains(&i) { RowKind::A } else { RowKind::B })
        .collect();
    red.nice_clustering(&rows)
}

/// Shape of a cluster in a nice clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ClusterType {
    /// Two adjacent bullets.
    E,
    /// Two adjacent bullets and a connector.
    F,
    /// Hub and a connector.
    I,
    /// A row end with its neighboring bullet.
    J,
    Singleton,
    Other,
}

pub fn classify(red: &Reduction, members: &[usize]) -> ClusterType {
    let roles: Vec<Role> = members.iter().map(|&i| red.roles[i]).collect();
    let bullets = roles.iter().filter(|r| matches!(r, Role::Bullet { .. })).count();
    let ends = roles.iter().filter(|r| matches!(r, Role::Start { .. } | Role::Finish { .. })).count();
    let hubs = roles.iter().filter(|r| matches!(r, Role::Gap { .. })).count();
    let connectors = roles.iter().filter(|r| r.is_connector()).count();
    match (roles.len(), bullets, ends, hubs, connectors) {
        (1, ..) => ClusterType::Singleton,
        (2, 2, 0, 0, 0) => ClusterType::E,
        (3, 2, 0, 0, 1) => ClusterType::F,
        (2, 0, 0, 1, 1) => ClusterType::I,
        (2, 1, 1, 0, 0) => ClusterType::J,
        _ => ClusterType::Other,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TypeRatios {
    pub e: Option<f64>,
    pub f: Option<f64>,
    pub i: Option<f64>,
    pub j: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub cost: f64,
    pub threshold: f64,
    pub gamma_star: f64,
    /// Lower bound the margin must respect.
    pub gamma_floor: f64,
    /// Whether the margin must equal `gamma_floor`.
    pub gamma_tight: bool,
    pub type_ratios: TypeRatios,
    pub checks: Vec<CheckItem>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const CERT_TOL: f64 = 1e-9;

/// Checks the row-cost, connector-increment, margin and cluster-type identities
/// of a nice clustering. Failures are itemized, not raised.
pub fn verify_reduction(red: &Reduction, nice: &NiceClustering) -> Result<VerificationReport> {
    let inst = &red.instance;
    let c = &nice.clustering;
    c.check_for(inst)?;
    let w = red.w as f64;
    let tol = CERT_TOL * w;
    let mut checks = Vec::new();
    let clusters = c.clusters();

    for (i, &kind) in nice.rows.iter().enumerate() {
        let groups = red.row_groups(i, kind);
        let structured = groups.iter().all(|g| {
            let label = c.label(g[0]);
            let row_members: Vec<usize> =
                clusters[label].iter().copied().filter(|&p| red.roles[p].is_row_point()).collect();
            row_members == *g
        });
        let cost: f64 = groups.iter().map(|g| cluster_cost(inst, g)).sum::<Result<f64>>()?;
        let expected = red.row_cost(kind);
        checks.push(CheckItem {
            name: format!("row {} {:?}-cost", i + 1, kind),
            passed: structured && (cost - expected).abs() <= tol,
            detail: format!("cost {cost}, expected {expected}, pattern intact: {structured}"),
        });
    }

    let good = red.good_increment();
    for (z, &role) in red.roles.iter().enumerate() {
        if !role.is_connector() {
            continue;
        }
        let host: Vec<usize> = clusters[c.label(z)].iter().copied().filter(|&p| p != z).collect();
        let (passed, detail) = if host.is_empty() {
            (false, "connector is a singleton".to_string())
        } else {
            let delta = cost_delta_add(inst, &host, z)?;
            ((delta - good).abs() <= tol, format!("increment {delta}, expected {good}"))
        };
        checks.push(CheckItem { name: format!("{role} increment"), passed, detail });
    }

    let total = kmeans_cost(inst, c)?;
    let report = max_margin(inst, c)?;
    let ratios = cluster_ratios(inst, c, &centroids(inst, c))?;
    let mut types = TypeRatios::default();
    for (members, r) in clusters.iter().zip(&ratios) {
        let slot = match classify(red, members) {
            ClusterType::E => &mut types.e,
            ClusterType::F => &mut types.f,
            ClusterType::I => &mut types.i,
            ClusterType::J => &mut types.j,
            _ => continue,
        };
        *slot = Some(slot.map_or(r.ratio, |v: f64| v.min(r.ratio)));
    }

    // The margin is at least sqrt(17/5) and attains it exactly when some
    // bullet pair hosts an unprimed connector.
    let floor = (17.0f64 / 5.0).sqrt();
    let tight = clusters.iter().any(|m| {
        classify(red, m) == ClusterType::F && m.iter().any(|&p| red.roles[p].is_connector() && !red.is_primed(p))
    });
    let rel = |a: f64, b: f64| (a - b).abs() <= CERT_TOL * b.abs().max(1.0);
    checks.push(CheckItem {
        name: "margin".into(),
        passed: if tight { rel(report.gamma_star, floor) } else { report.gamma_star >= floor * (1.0 - CERT_TOL) },
        detail: format!("gamma* {}, expected {} {floor}", report.gamma_star, if tight { "=" } else { ">=" }),
    });

    // A pair hosting an unprimed connector has ratio exactly sqrt(17/5). With a
    // primed connector the nearest outsider is the next bullet or the
    // connector across the row, and the ratio stays above that value.
    for (members, r) in clusters.iter().zip(&ratios) {
        if classify(red, members) != ClusterType::F {
            continue;
        }
        let z = *members.iter().find(|&&p| red.roles[p].is_connector()).expect("F holds a connector");
        let primed = red.is_primed(z);
        checks.push(CheckItem {
            name: format!("type F ratio {}", red.roles[z]),
            passed: if primed { r.ratio > floor } else { rel(r.ratio, floor) },
            detail: format!("{}, expected {} {floor}", r.ratio, if primed { ">" } else { "=" }),
        });
    }

    // An E pair's nearest outsider is a connector at distance h when one of
    // its column neighbors is unprimed or the row is B-paired; otherwise the
    // next bullet at distance 3.
    for (members, r) in clusters.iter().zip(&ratios) {
        if classify(red, members) != ClusterType::E {
            continue;
        }
        let want = red.e_ratio(members, nice);
        checks.push(CheckItem {
            name: format!("type E ratio {}", red.roles[members[0]]),
            passed: rel(r.ratio, want),
            detail: format!("{}, expected {want}", r.ratio),
        });
    }
    let mut type_check = |name: &str, value: Option<f64>, ok: &dyn Fn(f64) -> bool, want: &str| {
        if let Some(v) = value {
            checks.push(CheckItem { name: format!("type {name} ratio"), passed: ok(v), detail: format!("{v}, expected {want}") });
        }
    };
    type_check("I", types.i, &|v| v > 2.0, "> 2");
    type_check("J", types.j, &|v| v > 2.0, "> 2");

    let k_ok = c.k() == red.k;
    checks.push(CheckItem { name: "cluster count".into(), passed: k_ok, detail: format!("{} clusters, k = {}", c.k(), red.k) });

    Ok(VerificationReport {
        cost: total,
        threshold: red.threshold,
        gamma_star: report.gamma_star,
        gamma_floor: floor,
        gamma_tight: tight,
        type_ratios: types,
        checks,
    })
}

/// Whether a clustering of the reduced instance is nice: each row is exactly
/// A- or B-paired, hubs are alone or with one connector, and every connector
/// joins a row pair or hub whose cost rises by exactly the good increment.
pub fn is_nice(red: &Reduction, clustering: &Clustering) -> bool {
    if clustering.len() != red.instance.len() {
        return false;
    }
    let clusters = clustering.clusters();
    for i in 0..red.rows() {
        let s = red.index[&Role::Start { row: i }];
        let kind = if clustering.label(s) == clustering.label(red.bullet(i, 0)) { RowKind::B } else { RowKind::A };
        for g in red.row_groups(i, kind) {
            let row_members: Vec<usize> =
                clusters[clustering.label(g[0])].iter().copied().filter(|&p| !red.roles[p].is_connector()).collect();
            if row_members != g {
                return false;
            }
        }
    }
    let good = red.good_increment();
    for members in &clusters {
        let connectors: Vec<usize> = members.iter().copied().filter(|&p| red.roles[p].is_connector()).collect();
        let hubs = members.iter().filter(|&&p| matches!(red.roles[p], Role::Gap { .. })).count();
        match connectors.as_slice() {
            [] => {
                if hubs > 0 && members.len() > 1 {
                    return false;
                }
            }
            [z] => {
                let host: Vec<usize> = members.iter().copied().filter(|p| p != z).collect();
                let shape_ok = match host.len() {
                    1 => hubs == 1,
                    2 => hubs == 0 && host.iter().all(|&p| matches!(red.roles[p], Role::Bullet { .. })),
                    _ => false,
                };
                if !shape_ok {
                    return false;
                }
                let Ok(delta) = cost_delta_add(&red.instance, &host, *z) else { return false };
                if (delta - good).abs() > CERT_TOL * red.w as f64 {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Kinds of local damage applied to a nice clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Perturbation {
    /// A bullet leaves its pair for the neighboring pair, forming a triple
    /// (or a four-point cluster when that pair hosts a connector).
    BulletShift,
    /// A connector joins a nearby cluster other than its host.
    ConnectorMove,
    /// One point is split off into its own cluster and two nearby clusters merge.
    SplitMerge,
}

/// Applies one random perturbation and returns the damaged clustering with
/// `k` clusters, or `None` when the draw did not produce a non-nice clustering.
pub fn perturb<R: Rng + ?Sized>(
    red: &Reduction,
    base: &Clustering,
    kind: Perturbation,
    rng: &mut R,
) -> Option<Clustering> {
    let n = red.instance.len();
    let mut labels = base.labels().to_vec();
    match kind {
        Perturbation::BulletShift => {
            let row = rng.random_range(0..red.rows());
            let t = rng.random_range(0..red.bullets());
            let p = red.bullet(row, t);
            let neighbors: Vec<usize> =
                [t.checked_sub(1), (t + 1 < red.bullets()).then_some(t + 1)].into_iter().flatten().collect();
            let q = red.bullet(row, *neighbors.choose(rng)?);
            if labels[p] == labels[q] {
                return None;
            }
            labels[p] = labels[q];
        }
        Perturbation::ConnectorMove => {
            let connectors: Vec<usize> = (0..n).filter(|&i| red.roles[i].is_connector()).collect();
            let &z = connectors.choose(rng)?;
            let near = nearest_other(red, &labels, z, 6);
            let &target = near.choose(rng)?;
            labels[z] = labels[target];
        }
        Perturbation::SplitMerge => {
            let p = rng.random_range(0..n);
            if base.clusters()[labels[p]].len() < 2 {
                return None;
            }
            labels[p] = base.k();
            let a = rng.random_range(0..n);
            let near = nearest_other(red, &labels, a, 4);
            let &b = near.choose(rng)?;
            let (from, to) = (labels[b], labels[a]);
            for l in labels.iter_mut() {
                if *l == from {
                    *l = to;
                }
            }
        }
    }
    let c = Clustering::from_tags(labels).ok()?;
    (c.k() == red.k && !is_nice(red, &c)).then_some(c)
}

/// The `count` nearest points to `p` lying outside its cluster.
fn nearest_other(red: &Reduction, labels: &[usize], p: usize, count: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..labels.len())
        .filter(|&q| labels[q] != labels[p])
        .map(|q| (red.instance.dist(p, q), q))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(count).map(|(_, q)| q).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RoleEntry {
    pub index: usize,
    pub role: String,
    pub x: f64,
    pub y: f64,
}

/// Sidecar describing a reduced instance.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub m: usize,
    pub l: usize,
    pub k: usize,
    #[serde(rename = "L")]
    pub threshold: f64,
    #[serde(rename = "L_closed_form")]
    pub threshold_closed_form: f64,
    pub w: u64,
    pub locations: usize,
    pub constants: LayoutConstants,
    pub roles: Vec<RoleEntry>,
    /// One-based set indices of an exact cover, when one is known.
    pub cover: Option<Vec<usize>>,
    pub canonical_labels: Option<Vec<usize>>,
}

impl Reduction {
    pub fn certificate(&self, cover: Option<(&[usize], &NiceClustering)>) -> Certificate {
        let roles = self
            .roles
            .iter()
            .enumerate()
            .map(|(index, r)| {
                let p = self.instance.point(index).coords();
                RoleEntry { index, role: r.to_string(), x: p[0], y: p[1] }
            })
            .collect();
        Certificate {
            m: self.x3c.m(),
            l: self.rows(),
            k: self.k,
            threshold: self.threshold,
            threshold_closed_form: self.threshold_closed_form,
            w: self.w,
            locations: self.instance.len(),
            constants: self.constants,
            roles,
            cover: cover.map(|(rows, _)| rows.iter().map(|r| r + 1).collect()),
            canonical_labels: cover.map(|(_, nice)| nice.clustering.labels().to_vec()),
        }
    }
}
