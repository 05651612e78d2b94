//! Finite categories, functors, and finite-set fragments as explicit,
//! validated tables.
//!
//! A [`FinCategory`] is a flat morphism table with a dense composition map.
//! Hom-sets are derived views. Categories built from user input are checked
//! for shape first ([`InputError`]) and for the category laws second
//! ([`validate_category`]); the two failure modes are kept apart so a CLI
//! caller can distinguish "could not read" from "read, and it is wrong".

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MorId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorData {
    pub label: String,
    pub dom: ObjId,
    pub cod: ObjId,
}

/// Element tables attached to a finite-set fragment: every object carries its
/// elements and every morphism a function table on element indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentData {
    /// Elements per object, canonically sorted.
    pub elements: Vec<Vec<Value>>,
    /// Per morphism, the image index of each domain element.
    pub tables: Vec<Vec<usize>>,
}

/// A finite category given by explicit tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinCategory {
    pub name: String,
    objects: Vec<String>,
    morphisms: Vec<MorData>,
    identities: Vec<MorId>,
    /// Dense composition table indexed by `g.0 * n_mor + f.0`; `None` where
    /// the pair is not composable or the entry is missing.
    compose: Vec<Option<MorId>>,
    obj_index: HashMap<String, ObjId>,
    mor_index: HashMap<String, MorId>,
    /// Present exactly when the category is a finite-set fragment.
    pub fragment: Option<FragmentData>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum InputError {
    #[error("duplicate object label {0:?}")]
    DuplicateObject(String),
    #[error("duplicate morphism label {0:?}")]
    DuplicateMorphism(String),
    #[error("morphism {mor:?} references unknown object {object:?}")]
    DanglingObject { mor: String, object: String },
    #[error("identities table missing entry for object {0:?}")]
    MissingIdentity(String),
    #[error("identities entry for {object:?} names unknown morphism {mor:?}")]
    DanglingIdentity { object: String, mor: String },
    #[error("compose entry references unknown morphism {0:?}")]
    DanglingCompose(String),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("fixture {fixture:?}: {reason}")]
    BadFixtureParams { fixture: String, reason: String },
    #[error("{0}")]
    Other(String),
}

/// One category-law violation, carrying the morphisms involved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LawViolation {
    MissingComposite { g: String, f: String },
    SpuriousComposite { g: String, f: String },
    CompositeBoundary { g: String, f: String, composite: String },
    IdentityBoundary { object: String, id: String },
    LeftIdentity { f: String, got: String },
    RightIdentity { f: String, got: String },
    Associativity { f: String, g: String, h: String, left: String, right: String },
}

impl fmt::Display for LawViolation {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawViolation::MissingComposite { g, f } => {
                write!(out, "compose({g},{f}) undefined for composable pair")
            }
            LawViolation::SpuriousComposite { g, f } => {
                write!(out, "compose({g},{f}) defined but cod({f}) != dom({g})")
            }
            LawViolation::CompositeBoundary { g, f, composite } => {
                write!(out, "compose({g},{f}) = {composite} has wrong dom/cod")
            }
            LawViolation::IdentityBoundary { object, id } => {
                write!(out, "identity {id} of {object} is not an endomorphism of {object}")
            }
            LawViolation::LeftIdentity { f, got } => write!(out, "id∘{f} = {got} != {f}"),
            LawViolation::RightIdentity { f, got } => write!(out, "{f}∘id = {got} != {f}"),
            LawViolation::Associativity { f, g, h, left, right } => {
                write!(out, "(({h}∘{g})∘{f}) = {left} but ({h}∘({g}∘{f})) = {right}")
            }
        }
    }
}

/// Result of a law scan: `ok()` iff no violations were found.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<LawViolation>,
    pub checked_pairs: usize,
    pub checked_triples: usize,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl FinCategory {
    /// Builds a category from raw tables, checking shape only.
    ///
    /// `compose` lists entries `(g, f, g_after_f)`. Law checking is a
    /// separate step; see [`validate_category`].
    pub fn from_tables(
        name: &str,
        objects: Vec<String>,
        morphisms: Vec<(String, String, String)>,
        identities: &BTreeMap<String, String>,
        compose: Vec<(String, String, String)>,
    ) -> Result<FinCategory, InputError> {
        let mut obj_index = HashMap::new();
        for (i, o) in objects.iter().enumerate() {
            if obj_index.insert(o.clone(), ObjId(i)).is_some() {
                return Err(InputError::DuplicateObject(o.clone()));
            }
        }
        let mut mor_index = HashMap::new();
        let mut mors = Vec::new();
        for (label, dom, cod) in morphisms {
            let dom = *obj_index.get(&dom).ok_or_else(|| InputError::DanglingObject {
                mor: label.clone(),
                object: dom.clone(),
            })?;
            let cod = *obj_index.get(&cod).ok_or_else(|| InputError::DanglingObject {
                mor: label.clone(),
                object: cod.clone(),
            })?;
            if mor_index.insert(label.clone(), MorId(mors.len())).is_some() {
                return Err(InputError::DuplicateMorphism(label));
            }
            mors.push(MorData { label, dom, cod });
        }
        let mut ids = Vec::with_capacity(objects.len());
        for o in &objects {
            let id_label = identities
                .get(o)
                .ok_or_else(|| InputError::MissingIdentity(o.clone()))?;
            let id = *mor_index
                .get(id_label)
                .ok_or_else(|| InputError::DanglingIdentity {
                    object: o.clone(),
                    mor: id_label.clone(),
                })?;
            ids.push(id);
        }
        let n = mors.len();
        let mut table = vec![None; n * n];
        for (g, f, gf) in compose {
            let g = *mor_index
                .get(&g)
                .ok_or_else(|| InputError::DanglingCompose(g.clone()))?;
            let f = *mor_index
                .get(&f)
                .ok_or_else(|| InputError::DanglingCompose(f.clone()))?;
            let gf = *mor_index
                .get(&gf)
                .ok_or_else(|| InputError::DanglingCompose(gf.clone()))?;
            table[g.0 * n + f.0] = Some(gf);
        }
        Ok(FinCategory {
            name: name.to_string(),
            objects,
            morphisms: mors,
            identities: ids,
            compose: table,
            obj_index,
            mor_index,
            fragment: None,
        })
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn morphism_count(&self) -> usize {
        self.morphisms.len()
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjId> {
        (0..self.objects.len()).map(ObjId)
    }

    pub fn morphisms(&self) -> impl Iterator<Item = MorId> {
        (0..self.morphisms.len()).map(MorId)
    }

    pub fn object_label(&self, o: ObjId) -> &str {
        &self.objects[o.0]
    }

    pub fn mor(&self, m: MorId) -> &MorData {
        &self.morphisms[m.0]
    }

    pub fn mor_label(&self, m: MorId) -> &str {
        &self.morphisms[m.0].label
    }

    pub fn object_by_label(&self, label: &str) -> Option<ObjId> {
        self.obj_index.get(label).copied()
    }

    pub fn mor_by_label(&self, label: &str) -> Option<MorId> {
        self.mor_index.get(label).copied()
    }

    pub fn identity(&self, o: ObjId) -> MorId {
        self.identities[o.0]
    }

    pub fn is_identity(&self, m: MorId) -> bool {
        self.identities[self.morphisms[m.0].dom.0] == m
    }

    /// Raw table lookup; `None` when the entry is absent.
    pub fn compose_entry(&self, g: MorId, f: MorId) -> Option<MorId> {
        self.compose[g.0 * self.morphisms.len() + f.0]
    }

    /// Composition `g ∘ f`. Panics if the entry is missing; call only on
    /// validated categories.
    pub fn compose(&self, g: MorId, f: MorId) -> MorId {
        self.compose_entry(g, f).unwrap_or_else(|| {
            panic!(
                "missing composite {}∘{} in {}",
                self.mor_label(g),
                self.mor_label(f),
                self.name
            )
        })
    }

    pub fn hom(&self, dom: ObjId, cod: ObjId) -> Vec<MorId> {
        self.morphisms()
            .filter(|m| self.mor(*m).dom == dom && self.mor(*m).cod == cod)
            .collect()
    }

    /// Elements of a fragment object. Panics when the category carries no
    /// element tables.
    pub fn elements(&self, o: ObjId) -> &[Value] {
        &self.fragment.as_ref().expect("not a finset fragment").elements[o.0]
    }

    /// The function table of a fragment morphism, as element indices.
    pub fn element_table(&self, m: MorId) -> &[usize] {
        &self.fragment.as_ref().expect("not a finset fragment").tables[m.0]
    }

    pub fn is_fragment(&self) -> bool {
        self.fragment.is_some()
    }
}

/// Exhaustive law scan: composition totality/boundaries, identity laws, and
/// associativity over all composable triples.
pub fn validate_category(c: &FinCategory) -> ValidationReport {
    let mut report = ValidationReport::default();
    let label = |m: MorId| c.mor_label(m).to_string();

    for (o, id) in c.objects().zip(c.identities.iter()) {
        let d = c.mor(*id);
        if d.dom != o || d.cod != o {
            report.violations.push(LawViolation::IdentityBoundary {
                object: c.object_label(o).to_string(),
                id: d.label.clone(),
            });
        }
    }

    for g in c.morphisms() {
        for f in c.morphisms() {
            report.checked_pairs += 1;
            let composable = c.mor(f).cod == c.mor(g).dom;
            match (composable, c.compose_entry(g, f)) {
                (true, None) => report
                    .violations
                    .push(LawViolation::MissingComposite { g: label(g), f: label(f) }),
                (false, Some(_)) => report
                    .violations
                    .push(LawViolation::SpuriousComposite { g: label(g), f: label(f) }),
                (true, Some(gf)) => {
                    if c.mor(gf).dom != c.mor(f).dom || c.mor(gf).cod != c.mor(g).cod {
                        report.violations.push(LawViolation::CompositeBoundary {
                            g: label(g),
                            f: label(f),
                            composite: label(gf),
                        });
                    }
                }
                (false, None) => {}
            }
        }
    }
    if !report.violations.is_empty() {
        // Identity/associativity scans assume a total table.
        return report;
    }

    for f in c.morphisms() {
        let id_cod = c.identities[c.mor(f).cod.0];
        let id_dom = c.identities[c.mor(f).dom.0];
        let left = c.compose(id_cod, f);
        if left != f {
            report
                .violations
                .push(LawViolation::LeftIdentity { f: label(f), got: label(left) });
        }
        let right = c.compose(f, id_dom);
        if right != f {
            report
                .violations
                .push(LawViolation::RightIdentity { f: label(f), got: label(right) });
        }
    }

    for f in c.morphisms() {
        for g in c.morphisms() {
            if c.mor(f).cod != c.mor(g).dom {
                continue;
            }
            for h in c.morphisms() {
                if c.mor(g).cod != c.mor(h).dom {
                    continue;
                }
                report.checked_triples += 1;
                let left = c.compose(c.compose(h, g), f);
                let right = c.compose(h, c.compose(g, f));
                if left != right {
                    report.violations.push(LawViolation::Associativity {
                        f: label(f),
                        g: label(g),
                        h: label(h),
                        left: label(left),
                        right: label(right),
                    });
                }
            }
        }
    }
    report
}

/// A functor between finite categories, given by tables.
#[derive(Debug, Clone)]
pub struct FinFunctor {
    pub source: FinCategory,
    pub target: FinCategory,
    pub obj_map: Vec<ObjId>,
    pub mor_map: Vec<MorId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctorViolation {
    Boundary { mor: String },
    Identity { object: String },
    Composition { g: String, f: String },
}

impl fmt::Display for FunctorViolation {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctorViolation::Boundary { mor } => write!(out, "dom/cod not preserved at {mor}"),
            FunctorViolation::Identity { object } => {
                write!(out, "identity of {object} not preserved")
            }
            FunctorViolation::Composition { g, f } => {
                write!(out, "composition not preserved at ({g},{f})")
            }
        }
    }
}

/// Table scan for functor laws: boundaries, identities, composition.
pub fn validate_functor(func: &FinFunctor) -> Vec<FunctorViolation> {
    let mut violations = Vec::new();
    let src = &func.source;
    let tgt = &func.target;
    for m in src.morphisms() {
        let fm = func.mor_map[m.0];
        let d = src.mor(m);
        if tgt.mor(fm).dom != func.obj_map[d.dom.0] || tgt.mor(fm).cod != func.obj_map[d.cod.0] {
            violations.push(FunctorViolation::Boundary { mor: d.label.clone() });
        }
    }
    for o in src.objects() {
        if func.mor_map[src.identity(o).0] != tgt.identity(func.obj_map[o.0]) {
            violations.push(FunctorViolation::Identity {
                object: src.object_label(o).to_string(),
            });
        }
    }
    for g in src.morphisms() {
        for f in src.morphisms() {
            if src.mor(f).cod != src.mor(g).dom {
                continue;
            }
            let lhs = func.mor_map[src.compose(g, f).0];
            // The image pair may fail to be composable when boundaries are
            // already broken; that also counts against composition.
            let rhs = tgt.compose_entry(func.mor_map[g.0], func.mor_map[f.0]);
            if rhs != Some(lhs) {
                violations.push(FunctorViolation::Composition {
                    g: src.mor_label(g).to_string(),
                    f: src.mor_label(f).to_string(),
                });
            }
        }
    }
    violations
}

impl FinFunctor {
    pub fn identity(c: &FinCategory) -> FinFunctor {
        FinFunctor {
            source: c.clone(),
            target: c.clone(),
            obj_map: c.objects().collect(),
            mor_map: c.morphisms().collect(),
        }
    }
}

/// A named finite set with distinct element labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinSetObj {
    pub label: String,
    pub elements: Vec<Value>,
}

impl FinSetObj {
    pub fn new(label: &str, elements: Vec<Value>) -> Result<FinSetObj, InputError> {
        let mut sorted = elements.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != elements.len() {
            return Err(InputError::Other(format!(
                "element labels of {label:?} are not distinct"
            )));
        }
        Ok(FinSetObj { label: label.to_string(), elements: sorted })
    }

    /// The canonical n-element set `x0..x{n-1}`.
    pub fn canonical(label: &str, n: usize) -> FinSetObj {
        FinSetObj {
            label: label.to_string(),
            elements: (0..n).map(|i| Value::atom(format!("x{i}"))).collect(),
        }
    }
}

/// Fixture identifiers accepted by [`build_fixture`].
#[derive(Debug, Clone)]
pub enum Fixture {
    Terminal,
    Discrete(usize),
    Arrow,
    WalkingIdempotent,
    /// Poset from a reflexive-transitive relation on `0..n`.
    Poset { n: usize, le: Vec<(usize, usize)> },
    /// Chain poset `0 <= 1 <= ... <= n-1`.
    Chain(usize),
    /// One-object category from a multiplication table over labels.
    Monoid { elements: Vec<String>, unit: String, table: Vec<(String, String, String)> },
    Op(Box<Fixture>),
    Product(Box<Fixture>, Box<Fixture>),
    FinsetFragment(Vec<usize>),
}

/// Builds one of the named fixture categories. Every fixture passes
/// [`validate_category`]; for the monoid fixture a law-violating table is
/// reported as an input error.
pub fn build_fixture(fixture: &Fixture) -> Result<FinCategory, InputError> {
    match fixture {
        Fixture::Terminal => FinCategory::from_tables(
            "terminal",
            vec!["*".into()],
            vec![("id".into(), "*".into(), "*".into())],
            &[("*".to_string(), "id".to_string())].into_iter().collect(),
            vec![("id".into(), "id".into(), "id".into())],
        ),
        Fixture::Discrete(n) => {
            let objects: Vec<String> = (0..*n).map(|i| i.to_string()).collect();
            let morphisms = (0..*n)
                .map(|i| (format!("id{i}"), i.to_string(), i.to_string()))
                .collect();
            let identities = (0..*n).map(|i| (i.to_string(), format!("id{i}"))).collect();
            let compose = (0..*n)
                .map(|i| (format!("id{i}"), format!("id{i}"), format!("id{i}")))
                .collect();
            FinCategory::from_tables(&format!("discrete{n}"), objects, morphisms, &identities, compose)
        }
        Fixture::Arrow => FinCategory::from_tables(
            "two",
            vec!["0".into(), "1".into()],
            vec![
                ("id0".into(), "0".into(), "0".into()),
                ("id1".into(), "1".into(), "1".into()),
                ("u".into(), "0".into(), "1".into()),
            ],
            &[("0".to_string(), "id0".to_string()), ("1".to_string(), "id1".to_string())]
                .into_iter()
                .collect(),
            vec![
                ("id0".into(), "id0".into(), "id0".into()),
                ("id1".into(), "id1".into(), "id1".into()),
                ("u".into(), "id0".into(), "u".into()),
                ("id1".into(), "u".into(), "u".into()),
            ],
        ),
        Fixture::WalkingIdempotent => FinCategory::from_tables(
            "walking_idempotent",
            vec!["*".into()],
            vec![
                ("1".into(), "*".into(), "*".into()),
                ("e".into(), "*".into(), "*".into()),
            ],
            &[("*".to_string(), "1".to_string())].into_iter().collect(),
            vec![
                ("1".into(), "1".into(), "1".into()),
                ("1".into(), "e".into(), "e".into()),
                ("e".into(), "1".into(), "e".into()),
                ("e".into(), "e".into(), "e".into()),
            ],
        ),
        Fixture::Chain(n) => {
            let le = (0..*n)
                .flat_map(|i| (i..*n).map(move |j| (i, j)))
                .collect();
            build_fixture(&Fixture::Poset { n: *n, le })
        }
        Fixture::Poset { n, le } => {
            let rel: std::collections::BTreeSet<(usize, usize)> = le.iter().copied().collect();
            for i in 0..*n {
                if !rel.contains(&(i, i)) {
                    return Err(InputError::BadFixtureParams {
                        fixture: "poset".into(),
                        reason: format!("relation not reflexive at {i}"),
                    });
                }
            }
            for &(i, j) in &rel {
                if i >= *n || j >= *n {
                    return Err(InputError::BadFixtureParams {
                        fixture: "poset".into(),
                        reason: format!("pair ({i},{j}) out of range"),
                    });
                }
                for &(j2, k) in &rel {
                    if j2 == j && !rel.contains(&(i, k)) {
                        return Err(InputError::BadFixtureParams {
                            fixture: "poset".into(),
                            reason: format!("relation not transitive at ({i},{j},{k})"),
                        });
                    }
                }
            }
            let objects: Vec<String> = (0..*n).map(|i| i.to_string()).collect();
            let morphisms: Vec<(String, String, String)> = rel
                .iter()
                .map(|(i, j)| (format!("le_{i}_{j}"), i.to_string(), j.to_string()))
                .collect();
            let identities = (0..*n).map(|i| (i.to_string(), format!("le_{i}_{i}"))).collect();
            let mut compose = Vec::new();
            for &(i, j) in &rel {
                for &(j2, k) in &rel {
                    if j2 == j {
                        compose.push((format!("le_{j}_{k}"), format!("le_{i}_{j}"), format!("le_{i}_{k}")));
                    }
                }
            }
            FinCategory::from_tables(&format!("poset{n}"), objects, morphisms, &identities, compose)
        }
        Fixture::Monoid { elements, unit, table } => {
            let objects = vec!["*".to_string()];
            let morphisms = elements
                .iter()
                .map(|e| (e.clone(), "*".to_string(), "*".to_string()))
                .collect();
            let identities = [("*".to_string(), unit.clone())].into_iter().collect();
            let compose = table.clone();
            let cat = FinCategory::from_tables("monoid", objects, morphisms, &identities, compose)?;
            let report = validate_category(&cat);
            if !report.ok() {
                return Err(InputError::BadFixtureParams {
                    fixture: "monoid".into(),
                    reason: format!("table is not a monoid: {}", report.violations[0]),
                });
            }
            Ok(cat)
        }
        Fixture::Op(inner) => {
            let c = build_fixture(inner)?;
            Ok(op_category(&c))
        }
        Fixture::Product(a, b) => {
            let ca = build_fixture(a)?;
            let cb = build_fixture(b)?;
            product_category(&ca, &cb)
        }
        Fixture::FinsetFragment(sizes) => finset_fragment(sizes),
    }
}

/// The opposite category: same labels, dom/cod swapped, composition
/// transposed.
pub fn op_category(c: &FinCategory) -> FinCategory {
    let morphisms = c
        .morphisms()
        .map(|m| {
            let d = c.mor(m);
            (d.label.clone(), c.object_label(d.cod).to_string(), c.object_label(d.dom).to_string())
        })
        .collect();
    let identities = c
        .objects()
        .map(|o| (c.object_label(o).to_string(), c.mor_label(c.identity(o)).to_string()))
        .collect();
    let mut compose = Vec::new();
    for g in c.morphisms() {
        for f in c.morphisms() {
            if let Some(gf) = c.compose_entry(g, f) {
                // In the opposite category f∘g is defined and equals (g∘f)°.
                compose.push((
                    c.mor_label(f).to_string(),
                    c.mor_label(g).to_string(),
                    c.mor_label(gf).to_string(),
                ));
            }
        }
    }
    FinCategory::from_tables(
        &format!("op({})", c.name),
        c.objects().map(|o| c.object_label(o).to_string()).collect(),
        morphisms,
        &identities,
        compose,
    )
    .expect("opposite of a well-formed category is well-formed")
}

/// Binary product category with pairwise labels.
pub fn product_category(a: &FinCategory, b: &FinCategory) -> Result<FinCategory, InputError> {
    let pobj = |x: ObjId, y: ObjId| format!("({},{})", a.object_label(x), b.object_label(y));
    let pmor = |f: MorId, g: MorId| format!("({},{})", a.mor_label(f), b.mor_label(g));
    let objects: Vec<String> = a
        .objects()
        .flat_map(|x| b.objects().map(move |y| pobj(x, y)))
        .collect();
    let mut morphisms = Vec::new();
    for f in a.morphisms() {
        for g in b.morphisms() {
            morphisms.push((
                pmor(f, g),
                pobj(a.mor(f).dom, b.mor(g).dom),
                pobj(a.mor(f).cod, b.mor(g).cod),
            ));
        }
    }
    let identities = a
        .objects()
        .flat_map(|x| {
            b.objects()
                .map(move |y| (pobj(x, y), pmor(a.identity(x), b.identity(y))))
        })
        .collect();
    let mut compose = Vec::new();
    for f1 in a.morphisms() {
        for g1 in b.morphisms() {
            for f2 in a.morphisms() {
                for g2 in b.morphisms() {
                    if let (Some(ff), Some(gg)) = (a.compose_entry(f2, f1), b.compose_entry(g2, g1)) {
                        compose.push((pmor(f2, g2), pmor(f1, g1), pmor(ff, gg)));
                    }
                }
            }
        }
    }
    FinCategory::from_tables(&format!("{}x{}", a.name, b.name), objects, morphisms, &identities, compose)
}

/// Canonical label of a fragment function: dom, cod, and the image of each
/// domain element in order.
fn function_label(c_dom: &str, c_cod: &str, images: &[&Value]) -> String {
    let imgs: Vec<String> = images.iter().map(|v| v.to_string()).collect();
    format!("{c_dom}>{c_cod}:{}", imgs.join(","))
}

/// A finite-set fragment: one object per requested size, with all functions
/// between them as morphisms.
pub fn finset_fragment(sizes: &[usize]) -> Result<FinCategory, InputError> {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != sizes.len() {
        return Err(InputError::BadFixtureParams {
            fixture: "finset_fragment".into(),
            reason: "sizes must be distinct".into(),
        });
    }
    let sets: Vec<FinSetObj> = sorted
        .iter()
        .map(|&n| FinSetObj::canonical(&format!("s{n}"), n))
        .collect();
    fragment_of_sets(&sets)
}

/// Fragment over explicitly named sets, with all functions as morphisms.
pub fn fragment_of_sets(sets: &[FinSetObj]) -> Result<FinCategory, InputError> {
    let objects: Vec<String> = sets.iter().map(|s| s.label.clone()).collect();
    let mut morphisms = Vec::new();
    let mut tables: Vec<Vec<usize>> = Vec::new();
    // All functions dom -> cod, enumerated in lexicographic image order.
    for (di, dom) in sets.iter().enumerate() {
        for (ci, cod) in sets.iter().enumerate() {
            let dn = dom.elements.len();
            let cn = cod.elements.len();
            if dn == 0 {
                let images: Vec<&Value> = Vec::new();
                morphisms.push((function_label(&objects[di], &objects[ci], &images), di, ci));
                tables.push(Vec::new());
                continue;
            }
            if cn == 0 {
                continue; // no functions into the empty set from a nonempty one
            }
            let total = cn.pow(dn as u32);
            for code in 0..total {
                let mut idx = Vec::with_capacity(dn);
                let mut rest = code;
                for _ in 0..dn {
                    idx.push(rest % cn);
                    rest /= cn;
                }
                let images: Vec<&Value> = idx.iter().map(|&i| &cod.elements[i]).collect();
                morphisms.push((function_label(&objects[di], &objects[ci], &images), di, ci));
                tables.push(idx);
            }
        }
    }
    let mor_entries: Vec<(String, String, String)> = morphisms
        .iter()
        .map(|(l, d, c)| (l.clone(), objects[*d].clone(), objects[*c].clone()))
        .collect();
    // Identity = the function with image x_i at position i.
    let mut identities = BTreeMap::new();
    for (oi, set) in sets.iter().enumerate() {
        let images: Vec<&Value> = set.elements.iter().collect();
        identities.insert(objects[oi].clone(), function_label(&objects[oi], &objects[oi], &images));
    }
    let mut label_index: HashMap<&str, usize> = HashMap::new();
    for (i, (l, _, _)) in morphisms.iter().enumerate() {
        label_index.insert(l, i);
    }
    let mut compose = Vec::new();
    for (gi, (glabel, gdom, gcod)) in morphisms.iter().enumerate() {
        for (fi, (flabel, _, fcod)) in morphisms.iter().enumerate() {
            if fcod != gdom {
                continue;
            }
            let ftab = &tables[fi];
            let gtab = &tables[gi];
            let images: Vec<&Value> = ftab.iter().map(|&i| &sets[*gcod].elements[gtab[i]]).collect();
            let dom_of_f = morphisms[fi].1;
            let label = function_label(&objects[dom_of_f], &objects[*gcod], &images);
            compose.push((glabel.clone(), flabel.clone(), label));
        }
    }
    let mut cat = FinCategory::from_tables(
        &format!(
            "finset[{}]",
            sets.iter().map(|s| s.elements.len().to_string()).collect::<Vec<_>>().join(",")
        ),
        objects,
        mor_entries,
        &identities,
        compose,
    )?;
    cat.fragment = Some(FragmentData {
        elements: sets.iter().map(|s| s.elements.clone()).collect(),
        tables,
    });
    Ok(cat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrow() -> FinCategory {
        build_fixture(&Fixture::Arrow).unwrap()
    }

    #[test]
    fn arrow_category_validates() {
        assert!(validate_category(&arrow()).ok());
    }

    #[test]
    fn missing_identity_is_input_error() {
        let r = FinCategory::from_tables(
            "bad",
            vec!["0".into(), "1".into()],
            vec![
                ("id0".into(), "0".into(), "0".into()),
                ("id1".into(), "1".into(), "1".into()),
                ("u".into(), "0".into(), "1".into()),
            ],
            &[("1".to_string(), "id1".to_string())].into_iter().collect(),
            vec![("u".into(), "id0".into(), "u".into())],
        );
        assert!(matches!(r, Err(InputError::MissingIdentity(o)) if o == "0"));
    }

    fn non_associative_table() -> Vec<(String, String, String)> {
        // ((a∘a)∘b) = 1∘b = b, but (a∘(a∘b)) = a∘a = 1.
        vec![
            ("1".into(), "1".into(), "1".into()),
            ("1".into(), "a".into(), "a".into()),
            ("1".into(), "b".into(), "b".into()),
            ("a".into(), "1".into(), "a".into()),
            ("b".into(), "1".into(), "b".into()),
            ("a".into(), "a".into(), "1".into()),
            ("a".into(), "b".into(), "a".into()),
            ("b".into(), "a".into(), "b".into()),
            ("b".into(), "b".into(), "1".into()),
        ]
    }

    #[test]
    fn associativity_violation_names_the_triple() {
        let cat = FinCategory::from_tables(
            "bad_monoid",
            vec!["*".into()],
            vec![
                ("1".into(), "*".into(), "*".into()),
                ("a".into(), "*".into(), "*".into()),
                ("b".into(), "*".into(), "*".into()),
            ],
            &[("*".to_string(), "1".to_string())].into_iter().collect(),
            non_associative_table(),
        )
        .unwrap();
        let report = validate_category(&cat);
        assert!(!report.ok());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, LawViolation::Associativity { .. })));
    }

    #[test]
    fn walking_idempotent_absorbs() {
        let c = build_fixture(&Fixture::WalkingIdempotent).unwrap();
        assert!(validate_category(&c).ok());
        let e = c.mor_by_label("e").unwrap();
        assert_eq!(c.compose(e, e), e);
    }

    #[test]
    fn fragment_hom_counts() {
        let c = finset_fragment(&[1, 2]).unwrap();
        assert!(validate_category(&c).ok());
        let s1 = c.object_by_label("s1").unwrap();
        let s2 = c.object_by_label("s2").unwrap();
        assert_eq!(c.hom(s1, s1).len(), 1);
        assert_eq!(c.hom(s1, s2).len(), 2);
        assert_eq!(c.hom(s2, s1).len(), 1);
        assert_eq!(c.hom(s2, s2).len(), 4);
    }

    #[test]
    fn fragment_composition_is_function_composition() {
        let c = finset_fragment(&[1, 2, 3]).unwrap();
        assert!(validate_category(&c).ok());
        for g in c.morphisms() {
            for f in c.morphisms() {
                if c.mor(f).cod != c.mor(g).dom {
                    continue;
                }
                let gf = c.compose(g, f);
                let ft = c.element_table(f);
                let gt = c.element_table(g);
                let expected: Vec<usize> = ft.iter().map(|&i| gt[i]).collect();
                assert_eq!(c.element_table(gf), expected.as_slice());
            }
        }
    }

    #[test]
    fn op_reverses_u_and_is_involutive() {
        let c = arrow();
        let opc = op_category(&c);
        assert!(validate_category(&opc).ok());
        let u = opc.mor_by_label("u").unwrap();
        assert_eq!(opc.object_label(opc.mor(u).dom), "1");
        assert_eq!(opc.object_label(opc.mor(u).cod), "0");
        let opop = op_category(&opc);
        // Table equality under identity relabeling.
        for g in c.morphisms() {
            for f in c.morphisms() {
                assert_eq!(c.compose_entry(g, f), opop.compose_entry(g, f));
            }
        }
    }

    #[test]
    fn product_of_fixtures_validates() {
        let p = build_fixture(&Fixture::Product(
            Box::new(Fixture::Arrow),
            Box::new(Fixture::WalkingIdempotent),
        ))
        .unwrap();
        assert!(validate_category(&p).ok());
        assert_eq!(p.object_count(), 2);
        assert_eq!(p.morphism_count(), 6);
    }

    #[test]
    fn monoid_fixture_rejects_non_monoid_table() {
        let r = build_fixture(&Fixture::Monoid {
            elements: vec!["1".into(), "a".into(), "b".into()],
            unit: "1".into(),
            table: non_associative_table(),
        });
        assert!(matches!(r, Err(InputError::BadFixtureParams { .. })));
    }

    #[test]
    fn functor_validation() {
        let c = arrow();
        let idf = FinFunctor::identity(&c);
        assert!(validate_functor(&idf).is_empty());

        let term = build_fixture(&Fixture::Terminal).unwrap();
        let constant = FinFunctor {
            source: c.clone(),
            target: term.clone(),
            obj_map: vec![ObjId(0), ObjId(0)],
            mor_map: vec![MorId(0), MorId(0), MorId(0)],
        };
        assert!(validate_functor(&constant).is_empty());

        // Sending u to id0 breaks boundaries.
        let broken = FinFunctor {
            source: c.clone(),
            target: c.clone(),
            obj_map: vec![ObjId(0), ObjId(1)],
            mor_map: vec![MorId(0), MorId(1), MorId(0)],
        };
        let violations = validate_functor(&broken);
        assert!(violations
            .iter()
            .any(|v| matches!(v, FunctorViolation::Boundary { mor } if mor == "u")));
    }

    #[test]
    fn empty_carrier_fragment() {
        let c = finset_fragment(&[0, 1]).unwrap();
        assert!(validate_category(&c).ok());
        let s0 = c.object_by_label("s0").unwrap();
        let s1 = c.object_by_label("s1").unwrap();
        assert_eq!(c.hom(s0, s1).len(), 1);
        assert_eq!(c.hom(s1, s0).len(), 0);
        assert_eq!(c.hom(s0, s0).len(), 1);
    }
}
