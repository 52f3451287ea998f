use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::PddlError;
use crate::sexpr::{self, Pos, SExpr};

const SUPPORTED_REQUIREMENTS: &[&str] =
    &[":strips", ":typing", ":negative-preconditions", ":action-costs"];

const UNSUPPORTED_CONSTRUCTS: &[&str] = &[
    ":durative-action",
    ":derived",
    ":process",
    ":event",
    ":constraints",
    "forall",
    "exists",
    "when",
    "or",
    "imply",
    "either",
];

fn syntax(pos: Pos, expected: impl Into<String>) -> PddlError {
    PddlError::Syntax { line: pos.line, col: pos.col, expected: expected.into() }
}

fn unsupported(name: impl Into<String>, pos: Pos) -> PddlError {
    PddlError::UnsupportedFeature { name: name.into(), line: pos.line, col: pos.col }
}

fn read(text: &str) -> Result<SExpr, PddlError> {
    sexpr::read_one(text, true).map_err(|e| syntax(e.pos, e.expected))
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list().ok_or_else(|| syntax(e.pos(), what))
}

fn expect_atom<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    e.as_atom().ok_or_else(|| syntax(e.pos(), what))
}

/// Splits `(define (kind name) sections...)` into name and sections.
fn define_header<'a>(root: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "(define ...)")?;
    match items.first().and_then(SExpr::as_atom) {
        Some("define") => {}
        _ => return Err(syntax(root.pos(), "(define ...)")),
    }
    let header = items.get(1).ok_or_else(|| syntax(root.pos(), format!("({kind} <name>)")))?;
    let h = expect_list(header, &format!("({kind} <name>)"))?;
    if h.len() != 2 || h[0].as_atom() != Some(kind) {
        return Err(syntax(header.pos(), format!("({kind} <name>)")));
    }
    let name = expect_atom(&h[1], "name")?.to_string();
    Ok((name, &items[2..]))
}

/// Parses `a b - t c - u d` into typed names; untyped entries get `object`.
fn typed_list(items: &[SExpr]) -> Result<Vec<TypedName>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let e = &items[i];
        let a = expect_atom(e, "name in typed list")?;
        if a == "-" {
            let ty = items.get(i + 1).ok_or_else(|| syntax(e.pos(), "type after '-'"))?;
            if let Some(l) = ty.as_list() {
                let head = l.first().and_then(SExpr::as_atom).unwrap_or("");
                return Err(unsupported(head, ty.pos()));
            }
            let ty = expect_atom(ty, "type name")?;
            if pending.is_empty() {
                return Err(syntax(e.pos(), "names before '-'"));
            }
            out.extend(pending.drain(..).map(|name| TypedName { name, ty: ty.to_string() }));
            i += 2;
        } else {
            pending.push(a.to_string());
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|name| TypedName { name, ty: "object".into() }));
    Ok(out)
}

fn atom_pattern(e: &SExpr) -> Result<AtomPattern, PddlError> {
    let items = expect_list(e, "atom (pred args...)")?;
    let pred = items.first().ok_or_else(|| syntax(e.pos(), "predicate name"))?;
    let predicate = expect_atom(pred, "predicate name")?.to_string();
    if UNSUPPORTED_CONSTRUCTS.contains(&predicate.as_str()) {
        return Err(unsupported(predicate, e.pos()));
    }
    if predicate == "=" {
        return Err(unsupported("=", e.pos()));
    }
    let args = items[1..]
        .iter()
        .map(|a| expect_atom(a, "argument").map(str::to_string))
        .collect::<Result<_, _>>()?;
    Ok(AtomPattern { predicate, args })
}

fn literal(e: &SExpr) -> Result<Literal, PddlError> {
    if e.head() == Some("not") {
        let items = e.as_list().expect("list");
        if items.len() != 2 {
            return Err(syntax(e.pos(), "(not <atom>)"));
        }
        return Ok(Literal { positive: false, atom: atom_pattern(&items[1])? });
    }
    Ok(Literal { positive: true, atom: atom_pattern(e)? })
}

/// `(and l1 l2 ...)`, a single literal, or `()`.
fn conjunction(e: &SExpr) -> Result<Vec<&SExpr>, PddlError> {
    match e.head() {
        Some("and") => Ok(e.as_list().expect("list")[1..].iter().collect()),
        Some(h) if UNSUPPORTED_CONSTRUCTS.contains(&h) => Err(unsupported(h, e.pos())),
        _ => match e.as_list() {
            Some([]) => Ok(Vec::new()),
            Some(_) => Ok(vec![e]),
            None => Err(syntax(e.pos(), "condition")),
        },
    }
}

fn find_unsupported(e: &SExpr) -> Option<(String, Pos)> {
    match e {
        SExpr::Atom(a, p) if a.starts_with(':') && UNSUPPORTED_CONSTRUCTS.contains(&a.as_str()) => {
            Some((a.clone(), *p))
        }
        SExpr::Atom(..) => None,
        SExpr::List(items, _) => items.iter().find_map(find_unsupported),
    }
}

fn section_key<'a>(e: &'a SExpr) -> Result<(&'a str, &'a [SExpr]), PddlError> {
    let items = expect_list(e, "section (:keyword ...)")?;
    let key = items.first().ok_or_else(|| syntax(e.pos(), ":keyword"))?;
    let key = expect_atom(key, ":keyword")?;
    if !key.starts_with(':') {
        return Err(syntax(e.pos(), ":keyword"));
    }
    Ok((key, &items[1..]))
}

pub fn parse_domain(text: &str) -> Result<ParsedDomain, PddlError> {
    let root = read(text)?;
    if let Some((name, pos)) = find_unsupported(&root) {
        return Err(unsupported(name, pos));
    }
    let (name, sections) = define_header(&root, "domain")?;
    let mut domain = ParsedDomain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
    };
    for section in sections {
        let (key, body) = section_key(section)?;
        match key {
            ":requirements" => {
                for r in body {
                    let r = expect_atom(r, "requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(unsupported(r, section.pos()));
                    }
                    domain.requirements.push(r.to_string());
                }
            }
            ":types" => {
                domain.types = typed_list(body)?
                    .into_iter()
                    .map(|t| TypeDecl { name: t.name, parent: t.ty })
                    .collect();
                // A supertype used only on the right of `-` is declared implicitly.
                let implicit: Vec<String> = domain
                    .types
                    .iter()
                    .map(|t| t.parent.clone())
                    .filter(|p| p != "object" && !domain.types.iter().any(|t| &t.name == p))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                for name in implicit {
                    domain.types.push(TypeDecl { name, parent: "object".into() });
                }
            }
            ":constants" => domain.constants = typed_list(body)?,
            ":predicates" => {
                for p in body {
                    let items = expect_list(p, "(predicate ?args...)")?;
                    let name = expect_atom(
                        items.first().ok_or_else(|| syntax(p.pos(), "predicate name"))?,
                        "predicate name",
                    )?;
                    domain.predicates.push(PredicateDecl {
                        name: name.to_string(),
                        params: typed_list(&items[1..])?,
                    });
                }
            }
            ":functions" => {
                let mut i = 0;
                while i < body.len() {
                    let f = &body[i];
                    let items = expect_list(f, "(function ?args...)")?;
                    let name = expect_atom(
                        items.first().ok_or_else(|| syntax(f.pos(), "function name"))?,
                        "function name",
                    )?;
                    domain.functions.push(PredicateDecl {
                        name: name.to_string(),
                        params: typed_list(&items[1..])?,
                    });
                    i += 1;
                    if body.get(i).and_then(SExpr::as_atom) == Some("-") {
                        match body.get(i + 1).and_then(SExpr::as_atom) {
                            Some("number") => i += 2,
                            _ => return Err(unsupported("non-number function", f.pos())),
                        }
                    }
                }
            }
            ":action" => domain.actions.push(action_schema(section, body)?),
            other => return Err(unsupported(other, section.pos())),
        }
    }
    check_domain(&domain)?;
    Ok(domain)
}

fn action_schema(section: &SExpr, body: &[SExpr]) -> Result<ActionSchema, PddlError> {
    let name = expect_atom(
        body.first().ok_or_else(|| syntax(section.pos(), "action name"))?,
        "action name",
    )?
    .to_string();
    let mut schema = ActionSchema {
        name,
        params: Vec::new(),
        precondition: Vec::new(),
        add: Vec::new(),
        delete: Vec::new(),
        cost: Vec::new(),
    };
    let mut i = 1;
    while i < body.len() {
        let key = expect_atom(&body[i], "action keyword")?;
        let value = body.get(i + 1).ok_or_else(|| syntax(body[i].pos(), format!("value for {key}")))?;
        match key {
            ":parameters" => schema.params = typed_list(expect_list(value, "parameter list")?)?,
            ":precondition" => {
                for l in conjunction(value)? {
                    schema.precondition.push(literal(l)?);
                }
            }
            ":effect" => {
                for e in conjunction(value)? {
                    match e.head() {
                        Some("increase") => {
                            let items = e.as_list().expect("list");
                            if items.len() != 3 || items[1].head() != Some("total-cost") {
                                return Err(unsupported("numeric effect", e.pos()));
                            }
                            let amount = &items[2];
                            let cost = match amount.as_atom() {
                                Some(n) => CostExpr::Constant(
                                    n.parse().map_err(|_| syntax(amount.pos(), "nonnegative integer cost"))?,
                                ),
                                None => CostExpr::Function(atom_pattern(amount)?),
                            };
                            schema.cost.push(cost);
                        }
                        Some("decrease") | Some("assign") | Some("scale-up") | Some("scale-down") => {
                            return Err(unsupported(e.head().unwrap_or_default(), e.pos()))
                        }
                        _ => {
                            let l = literal(e)?;
                            if l.positive {
                                schema.add.push(l.atom);
                            } else {
                                schema.delete.push(l.atom);
                            }
                        }
                    }
                }
            }
            other => return Err(syntax(body[i].pos(), format!("action keyword, found {other}"))),
        }
        i += 2;
    }
    Ok(schema)
}

fn check_domain(d: &ParsedDomain) -> Result<(), PddlError> {
    let mut seen = BTreeSet::new();
    for t in &d.types {
        if !seen.insert(("type", t.name.as_str())) {
            return Err(PddlError::Semantic(format!("duplicate type {}", t.name)));
        }
    }
    for t in &d.types {
        if !d.has_type(&t.parent) {
            return Err(PddlError::Type(format!("undeclared supertype {} of {}", t.parent, t.name)));
        }
    }
    let mut arity = BTreeMap::new();
    for p in &d.predicates {
        if arity.insert(p.name.as_str(), p.params.len()).is_some() {
            return Err(PddlError::Semantic(format!("duplicate predicate {}", p.name)));
        }
        for param in &p.params {
            if !d.has_type(&param.ty) {
                return Err(PddlError::Type(format!("undeclared type {} in {}", param.ty, p.name)));
            }
        }
    }
    let constants: BTreeSet<&str> = d.constants.iter().map(|c| c.name.as_str()).collect();
    for a in &d.actions {
        if !seen.insert(("action", a.name.as_str())) {
            return Err(PddlError::Semantic(format!("duplicate action {}", a.name)));
        }
        let params: BTreeSet<&str> = a.params.iter().map(|p| p.name.as_str()).collect();
        if params.len() != a.params.len() {
            return Err(PddlError::Semantic(format!("duplicate parameter in {}", a.name)));
        }
        for p in &a.params {
            if !d.has_type(&p.ty) {
                return Err(PddlError::Type(format!("undeclared type {} in {}", p.ty, a.name)));
            }
        }
        let atoms = a
            .precondition
            .iter()
            .map(|l| &l.atom)
            .chain(&a.add)
            .chain(&a.delete);
        for atom in atoms {
            match arity.get(atom.predicate.as_str()) {
                None => {
                    return Err(PddlError::Semantic(format!(
                        "undeclared predicate {} in {}",
                        atom.predicate, a.name
                    )))
                }
                Some(&n) if n != atom.args.len() => {
                    return Err(PddlError::Semantic(format!(
                        "predicate {} used with {} arguments, declared {}",
                        atom.predicate,
                        atom.args.len(),
                        n
                    )))
                }
                _ => {}
            }
            for arg in &atom.args {
                let bound = if arg.starts_with('?') {
                    params.contains(arg.as_str())
                } else {
                    constants.contains(arg.as_str())
                };
                if !bound {
                    return Err(PddlError::Semantic(format!("unbound term {arg} in {}", a.name)));
                }
            }
        }
    }
    Ok(())
}

pub fn parse_problem(text: &str, domain: &ParsedDomain) -> Result<ParsedProblem, PddlError> {
    let root = read(text)?;
    let (name, sections) = define_header(&root, "problem")?;
    let mut problem = ParsedProblem {
        name,
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        numeric_init: Vec::new(),
        diagnostics: Vec::new(),
    };
    for section in sections {
        let (key, body) = section_key(section)?;
        match key {
            ":domain" => {
                let d = body.first().ok_or_else(|| syntax(section.pos(), "domain name"))?;
                problem.domain = expect_atom(d, "domain name")?.to_string();
            }
            ":objects" => problem.objects = typed_list(body)?,
            ":init" => {
                for e in body {
                    if e.head() == Some("=") {
                        let items = e.as_list().expect("list");
                        if items.len() != 3 {
                            return Err(syntax(e.pos(), "(= (function args) value)"));
                        }
                        let function = atom_pattern(&items[1])?;
                        let value = expect_atom(&items[2], "numeric value")?;
                        let value = value
                            .parse()
                            .map_err(|_| syntax(items[2].pos(), "nonnegative integer"))?;
                        problem.numeric_init.push(NumericFact { function, value });
                    } else {
                        problem.init.push(atom_pattern(e)?);
                    }
                }
            }
            ":goal" => problem.diagnostics.push(format!(
                "GOAL_PRESENT at {}: goals in the problem file are ignored; use plan properties",
                section.pos()
            )),
            ":metric" => {}
            other => return Err(unsupported(other, section.pos())),
        }
    }
    if problem.domain != domain.name {
        return Err(PddlError::Type(format!(
            "problem refers to domain {}, parsed domain is {}",
            problem.domain, domain.name
        )));
    }
    check_problem(&problem, domain)?;
    Ok(problem)
}

fn check_problem(p: &ParsedProblem, d: &ParsedDomain) -> Result<(), PddlError> {
    let mut types: BTreeMap<&str, &str> = BTreeMap::new();
    for o in d.constants.iter().chain(&p.objects) {
        if !d.has_type(&o.ty) {
            return Err(PddlError::Type(format!("object {} has undeclared type {}", o.name, o.ty)));
        }
        if types.insert(&o.name, &o.ty).is_some() {
            return Err(PddlError::Semantic(format!("duplicate object {}", o.name)));
        }
    }
    for atom in &p.init {
        let decl = d
            .predicate(&atom.predicate)
            .ok_or_else(|| PddlError::Type(format!("undeclared predicate in init: {atom}")))?;
        check_args(atom, &decl.params, &types, d)?;
    }
    for n in &p.numeric_init {
        if n.function.predicate == "total-cost" {
            continue;
        }
        let decl = d
            .functions
            .iter()
            .find(|f| f.name == n.function.predicate)
            .ok_or_else(|| PddlError::Type(format!("undeclared function {}", n.function)))?;
        check_args(&n.function, &decl.params, &types, d)?;
    }
    Ok(())
}

fn check_args(
    atom: &AtomPattern,
    params: &[TypedName],
    types: &BTreeMap<&str, &str>,
    d: &ParsedDomain,
) -> Result<(), PddlError> {
    if params.len() != atom.args.len() {
        return Err(PddlError::Type(format!("wrong arity in {atom}")));
    }
    for (arg, param) in atom.args.iter().zip(params) {
        let ty = types
            .get(arg.as_str())
            .ok_or_else(|| PddlError::Type(format!("undeclared object {arg} in {atom}")))?;
        if !d.is_subtype(ty, &param.ty) {
            return Err(PddlError::Type(format!(
                "object {arg} of type {ty} does not fit {} in {atom}",
                param.ty
            )));
        }
    }
    Ok(())
}
