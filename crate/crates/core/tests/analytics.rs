mod common;

use std::collections::{BTreeMap, BTreeSet};

use codm::analytics::{
    build_cube, change_level, hierarchy_tree, infer, ConstraintSet, CubeSpec, Expansion, Level,
    LevelChange, Member, TreeSpec,
};
use codm::query::ast::AggFn;
use codm::query::parse_expr;
use codm::schema::DimDef;
use codm::{ConceptId, Database, Error, ItemRef, Value};
use common::*;

fn segs(s: &str) -> Vec<String> {
    s.split('.').map(str::to_string).collect()
}

#[test]
fn group_sales_by_country() {
    let s = f_sales();
    let member = Member::Subitems {
        concept: s.sales,
        path: segs("country"),
    };
    let amount = parse_expr("amount").unwrap();
    let rs = s
        .db
        .group_aggregate(s.countries, &member, Some(&amount), AggFn::Sum)
        .unwrap();
    assert_eq!(rs.column_names(), ["Countries", "sum"]);
    // Nested-loop oracle.
    let facts: Vec<(ItemRef, i64)> = s
        .db
        .store()
        .items(s.sales)
        .map(|(_, it)| match (&it.values[0], &it.values[2]) {
            (Value::Ref(k), Value::Int(a)) => (*k, *a),
            _ => unreachable!(),
        })
        .collect();
    for (row, k) in rs.rows.iter().zip(s.k) {
        let expected: i64 = facts.iter().filter(|(c, _)| *c == k).map(|(_, a)| a).sum();
        assert_eq!(row, &vec![Value::Ref(k), Value::Int(expected)]);
    }
    assert_eq!(rs.column(1), [Value::Int(15), Value::Int(7), Value::Int(0)]);
}

#[test]
fn group_sizes_by_objects() {
    let f = f_obj();
    let member = Member::Subitems {
        concept: f.objects,
        path: segs("size"),
    };
    let rs = f.db.group_aggregate(f.sizes, &member, None, AggFn::Size).unwrap();
    assert_eq!(rs.column(1), [Value::Int(1), Value::Int(2)]);

    let err = f.db.group_aggregate(f.colors, &member, None, AggFn::Size).unwrap_err();
    assert!(matches!(err, Error::Type(_)));
    let err = f
        .db
        .group_aggregate(f.sizes, &Member::Property("tags".into()), None, AggFn::Size)
        .unwrap_err();
    assert!(matches!(err, Error::UnknownProperty(_)));
}

#[test]
fn group_over_empty_members() {
    let mut s = f_sales();
    for t in s.t {
        s.db.delete(t).unwrap();
    }
    let member = Member::Subitems {
        concept: s.sales,
        path: segs("country"),
    };
    let amount = parse_expr("amount").unwrap();
    let avg = s.db.group_aggregate(s.countries, &member, Some(&amount), AggFn::Avg).unwrap();
    assert!(avg.column(1).iter().all(Value::is_null));
    let sum = s.db.group_aggregate(s.countries, &member, Some(&amount), AggFn::Sum).unwrap();
    assert!(sum.column(1).iter().all(|v| *v == Value::Int(0)));
}

#[test]
fn group_by_mv_property() {
    let f = f_obj();
    let mut db = f.db.clone();
    db.define_mv_property(f.sizes, "fits", f.colors).unwrap();
    db.mv_add(f.s[0], "fits", f.c[0]).unwrap();
    db.mv_add(f.s[0], "fits", f.c[1]).unwrap();
    let rs = db
        .group_aggregate(f.sizes, &Member::Property("fits".into()), None, AggFn::Size)
        .unwrap();
    assert_eq!(rs.column(1), [Value::Int(2), Value::Int(0)]);
}

fn sales_cube(s: &Sales, axes: &[&str], agg: AggFn) -> CubeSpec {
    let measure = (agg != AggFn::Size).then(|| parse_expr("amount").unwrap());
    CubeSpec::new(&s.db, s.sales, axes, measure, agg).unwrap()
}

#[test]
fn cube_two_axes() {
    let s = f_sales();
    let spec = sales_cube(&s, &["country", "product"], AggFn::Sum);
    let cube = build_cube(&s.db, &spec).unwrap();
    assert_eq!(cube.cells.len(), 6);
    let [de, fr, it] = s.k;
    let [food, tools] = s.p;
    let v = |a, b| cube.cell(&[a, b]).unwrap().value.clone();
    assert_eq!(v(de, food), Some(Value::Int(10)));
    assert_eq!(v(de, tools), Some(Value::Int(5)));
    assert_eq!(v(fr, food), Some(Value::Int(7)));
    assert_eq!(v(fr, tools), None);
    assert_eq!(v(it, food), None);
    assert_eq!(v(it, tools), None);

    let csv = cube.to_csv(&s.db, false).unwrap();
    assert_eq!(
        csv,
        "Countries,Products,sum\n\
         Countries#1 (Germany),Products#1 (food),10\n\
         Countries#1 (Germany),Products#2 (tools),5\n\
         Countries#2 (France),Products#1 (food),7\n"
    );
    let all = cube.to_csv(&s.db, true).unwrap();
    assert_eq!(all.lines().count(), 7);
    assert!(all.ends_with("Countries#3 (Italy),Products#2 (tools),\n"));
}

#[test]
fn cube_single_axis_size() {
    let s = f_sales();
    let cube = build_cube(&s.db, &sales_cube(&s, &["country"], AggFn::Size)).unwrap();
    let vals: Vec<_> = cube.cells.iter().map(|c| c.value.clone().unwrap()).collect();
    assert_eq!(vals, [Value::Int(2), Value::Int(1), Value::Int(0)]);
}

#[test]
fn cube_on_fact_itself() {
    let s = f_sales();
    let cube = build_cube(&s.db, &sales_cube(&s, &["", "product"], AggFn::Sum)).unwrap();
    assert_eq!(cube.cells.len(), 6);
    assert!(cube.cells.iter().all(|c| c.facts <= 1));
    assert_eq!(cube.cells.iter().filter(|c| c.facts == 1).count(), 3);
}

#[test]
fn cube_errors_and_filters() {
    let s = f_sales();
    let err = CubeSpec::new(&s.db, s.sales, &["amount"], None, AggFn::Size).unwrap_err();
    assert!(matches!(err, Error::InvalidAxisPath(_)));
    let err = CubeSpec::new(&s.db, s.sales, &["region"], None, AggFn::Size).unwrap_err();
    assert!(matches!(err, Error::InvalidAxisPath(_)));

    let spec = sales_cube(&s, &["country"], AggFn::Sum).with_filter(parse_expr("amount > 6").unwrap());
    let cube = build_cube(&s.db, &spec).unwrap();
    let vals: Vec<_> = cube.cells.iter().map(|c| c.value.clone()).collect();
    assert_eq!(vals, [Some(Value::Int(10)), Some(Value::Int(7)), None]);
}

/// Compares a cube with its query form: empty cells hold the aggregate of
/// nothing in the query result.
fn agrees(db: &Database, spec: &CubeSpec) {
    let cube = build_cube(db, spec).unwrap();
    let rs = db.query(&spec.query_text(db)).unwrap();
    assert_eq!(rs.len(), cube.cells.len(), "{}", spec.query_text(db));
    for (row, cell) in rs.rows.iter().zip(&cube.cells) {
        let n = cell.coords.len();
        let coords: Vec<Value> = cell.coords.iter().map(|&r| Value::Ref(r)).collect();
        assert_eq!(row[..n], coords[..]);
        let expected = cell
            .value
            .clone()
            .unwrap_or_else(|| codm::query::eval::aggregate(spec.agg, &[]).unwrap());
        assert_eq!(row[n], expected);
    }
}

#[test]
fn cube_matches_query_form() {
    let s = f_sales();
    for agg in [AggFn::Sum, AggFn::Size, AggFn::Avg, AggFn::Min, AggFn::Max] {
        agrees(&s.db, &sales_cube(&s, &["country", "product"], agg));
        agrees(&s.db, &sales_cube(&s, &["product"], agg));
        agrees(&s.db, &sales_cube(&s, &["", "country"], agg));
    }
    let filtered = sales_cube(&s, &["country"], AggFn::Sum).with_filter(parse_expr("amount < 8").unwrap());
    agrees(&s.db, &filtered);
}

/// Countries ← States ← Counties, with sales facts at the county level.
fn f_regions() -> (Database, [ConceptId; 4]) {
    let (mut db, countries, k) = f_geo();
    let states = db
        .define_concept(
            "States",
            vec![DimDef::new("name", "String"), DimDef::new("country", "Countries")],
        )
        .unwrap();
    let counties = db
        .define_concept(
            "Counties",
            vec![DimDef::new("name", "String"), DimDef::new("state", "States")],
        )
        .unwrap();
    let facts = db
        .define_concept(
            "Facts",
            vec![DimDef::new("county", "Counties"), DimDef::new("amount", "Integer")],
        )
        .unwrap();
    let mut st = Vec::new();
    for (n, c) in [("Bavaria", k[0]), ("Saxony", k[0]), ("Alsace", k[1])] {
        st.push(db.insert(states, vec![Value::str(n), c.into()]).unwrap());
    }
    let mut co = Vec::new();
    for (n, x) in [("A", 0), ("B", 0), ("C", 1), ("D", 2)] {
        co.push(db.insert(counties, vec![Value::str(n), st[x].into()]).unwrap());
    }
    for (x, a) in [(0, 3), (1, 4), (1, 5), (2, 7), (3, 11)] {
        db.insert(facts, vec![co[x].into(), Value::Int(a)]).unwrap();
    }
    (db, [countries, states, counties, facts])
}

#[test]
fn roll_up_and_drill_down() {
    let (db, [countries, states, counties, facts]) = f_regions();
    let measure = Some(parse_expr("amount").unwrap());
    let spec = CubeSpec::new(&db, facts, &["county.state"], measure, AggFn::Sum).unwrap();
    assert_eq!(spec.axes[0].concept, states);

    let up = change_level(&db, &spec, 0, LevelChange::RollUp, "country").unwrap();
    assert_eq!(up.axes[0].concept, countries);
    assert_eq!(up.axes[0].path.steps, segs("county.state.country"));
    let back = change_level(&db, &up, 0, LevelChange::DrillDown, "country").unwrap();
    assert_eq!(back, spec);
    let down = change_level(&db, &spec, 0, LevelChange::DrillDown, "state").unwrap();
    assert_eq!(down.axes[0].concept, counties);

    for bad in [
        change_level(&db, &up, 0, LevelChange::RollUp, "CountryName"),
        change_level(&db, &spec, 0, LevelChange::DrillDown, "country"),
        change_level(&db, &spec, 3, LevelChange::RollUp, "country"),
    ] {
        assert!(matches!(bad.unwrap_err(), Error::NoSuchLevel(_)));
    }

    // Coarse cells equal the sums of their fine cells.
    for fine_spec in [&down, &spec] {
        let fine = build_cube(&db, fine_spec).unwrap();
        let coarse = build_cube(&db, &up).unwrap();
        let mut sums: BTreeMap<ItemRef, i64> = BTreeMap::new();
        let rest = &up.axes[0].path.steps[fine_spec.axes[0].path.steps.len()..];
        let rest = codm::schema::DimPath {
            source: fine_spec.axes[0].concept,
            steps: rest.to_vec(),
            target: countries,
        };
        for cell in &fine.cells {
            let Value::Ref(k) = db.store().get_super(db.schema(), cell.coords[0], &rest).unwrap() else {
                panic!("dangling level")
            };
            let v = match &cell.value {
                Some(Value::Int(v)) => *v,
                _ => 0,
            };
            *sums.entry(k).or_default() += v;
        }
        for cell in &coarse.cells {
            let v = match &cell.value {
                Some(Value::Int(v)) => *v,
                _ => 0,
            };
            assert_eq!(sums.get(&cell.coords[0]).copied().unwrap_or(0), v);
        }
    }
    let coarse = build_cube(&db, &up).unwrap();
    let vals: Vec<_> = coarse.cells.iter().map(|c| c.value.clone()).collect();
    assert_eq!(vals, [Some(Value::Int(19)), Some(Value::Int(11)), None]);
}

fn constraint(pairs: &[(ConceptId, &[ItemRef])]) -> ConstraintSet {
    pairs
        .iter()
        .map(|(c, items)| (*c, items.iter().copied().collect::<BTreeSet<_>>()))
        .collect()
}

#[test]
fn inference_examples() {
    let f = f_obj();
    let small = infer(&f.db, &constraint(&[(f.sizes, &[f.s[0]])]), f.colors).unwrap();
    assert_eq!(small, [f.c[1]]);
    let large = infer(&f.db, &constraint(&[(f.sizes, &[f.s[1]])]), f.colors).unwrap();
    assert_eq!(large, [f.c[0], f.c[1]]);
    let open = infer(&f.db, &ConstraintSet::new(), f.colors).unwrap();
    assert_eq!(open, [f.c[0], f.c[1]]);
    let none = infer(&f.db, &constraint(&[(f.sizes, &[])]), f.colors).unwrap();
    assert!(none.is_empty());

    // Target constrained too: intersection with the input.
    let both = infer(
        &f.db,
        &constraint(&[(f.sizes, &[f.s[1]]), (f.colors, &[f.c[0]])]),
        f.colors,
    )
    .unwrap();
    assert_eq!(both, [f.c[0]]);
    // Upward from colours to sizes.
    let red = infer(&f.db, &constraint(&[(f.colors, &[f.c[0]])]), f.sizes).unwrap();
    assert_eq!(red, [f.s[1]]);
}

#[test]
fn inference_nulls_and_errors() {
    let mut f = f_obj_with(true, false);
    f.db.update(f.o[0], "size", Value::Null).unwrap();
    let any_size = constraint(&[(f.sizes, &[f.s[0], f.s[1]])]);
    assert_eq!(infer(&f.db, &any_size, f.colors).unwrap(), [f.c[0], f.c[1]]);
    // o1 has no size, so only o3 certifies red under the constraint.
    let small = constraint(&[(f.sizes, &[f.s[0]])]);
    assert!(infer(&f.db, &small, f.colors).unwrap().is_empty());

    let mut db = f.db.clone();
    let lone = db.define_concept("Lone", vec![DimDef::new("x", "Integer")]).unwrap();
    let err = infer(&db, &constraint(&[(lone, &[])]), f.colors).unwrap_err();
    assert!(matches!(err, Error::NoCommonSubconcept(_)));
}

#[test]
fn inference_across_sales() {
    let s = f_sales();
    let food = constraint(&[(s.products, &[s.p[0]])]);
    assert_eq!(infer(&s.db, &food, s.countries).unwrap(), [s.k[0], s.k[1]]);
    let tools = constraint(&[(s.products, &[s.p[1]])]);
    assert_eq!(infer(&s.db, &tools, s.countries).unwrap(), [s.k[0]]);
    let fr = constraint(&[(s.countries, &[s.k[1]])]);
    assert_eq!(infer(&s.db, &fr, s.products).unwrap(), [s.p[0]]);
}

#[test]
fn tree_sales_by_country() {
    let s = f_sales();
    let spec = TreeSpec {
        levels: vec![
            Level::new(s.countries, Expansion::All).show("CountryName"),
            Level::new(s.sales, Expansion::Subitems(segs("country"))).show("amount"),
        ],
    };
    let root = hierarchy_tree(&s.db, &spec, 10).unwrap();
    assert_eq!(root.label, "⊤");
    assert_eq!(root.children.len(), 3);
    let de: Vec<_> = root.children[0].children.iter().map(|n| n.item.unwrap()).collect();
    assert_eq!(de, [s.t[0], s.t[1]]);
    assert!(root.children[2].children.is_empty());
    assert_eq!(
        root.dump(&s.db),
        "⊤\n  Countries#1 (Germany) [CountryName=Germany]\n    Sales#1 (Germany) [amount=10]\n    \
         Sales#2 (Germany) [amount=5]\n  Countries#2 (France) [CountryName=France]\n    \
         Sales#3 (France) [amount=7]\n  Countries#3 (Italy) [CountryName=Italy]\n"
    );

    let shallow = hierarchy_tree(&s.db, &spec, 1).unwrap();
    assert_eq!(shallow.children.len(), 3);
    assert!(shallow.children.iter().all(|n| n.children.is_empty()));
}

#[test]
fn tree_zigzag_expansion() {
    let s = f_sales();
    let spec = TreeSpec {
        levels: vec![
            Level::new(s.products, Expansion::All),
            Level::new(s.sales, Expansion::Subitems(segs("product"))),
            Level::new(s.countries, Expansion::Property(segs("country"))),
        ],
    };
    let root = hierarchy_tree(&s.db, &spec, 3).unwrap();
    let food = &root.children[0];
    let sales: Vec<_> = food.children.iter().map(|n| n.item.unwrap()).collect();
    assert_eq!(sales, [s.t[0], s.t[2]]);
    let countries: Vec<_> = food.children.iter().map(|n| n.children[0].item.unwrap()).collect();
    assert_eq!(countries, [s.k[0], s.k[1]]);
    // The same country under two parents is two nodes.
    assert_eq!(root.count(), 1 + 2 + 3 + 3);
}

#[test]
fn tree_filters_prune_subtrees() {
    let s = f_sales();
    let spec = TreeSpec {
        levels: vec![
            Level::new(s.countries, Expansion::All).filter(parse_expr("CountryPopulation > 45").unwrap()),
            Level::new(s.sales, Expansion::Subitems(segs("country")))
                .filter(parse_expr("amount != 5").unwrap()),
        ],
    };
    let root = hierarchy_tree(&s.db, &spec, 2).unwrap();
    let items: Vec<_> = root.children.iter().map(|n| n.item.unwrap()).collect();
    assert_eq!(items, [s.k[0], s.k[1]]);
    assert_eq!(root.count(), 1 + 2 + 2);
}

#[test]
fn tree_via_mv_property_and_errors() {
    let f = f_obj();
    let mut db = f.db.clone();
    db.define_mv_property(f.sizes, "fits", f.colors).unwrap();
    db.mv_add(f.s[1], "fits", f.c[0]).unwrap();
    let spec = TreeSpec {
        levels: vec![
            Level::new(f.sizes, Expansion::All),
            Level::new(f.colors, Expansion::Property(segs("fits"))),
        ],
    };
    let root = hierarchy_tree(&db, &spec, 2).unwrap();
    assert!(root.children[0].children.is_empty());
    assert_eq!(root.children[1].children[0].item, Some(f.c[0]));

    let bad = [
        TreeSpec {
            levels: vec![Level::new(f.colors, Expansion::Subitems(segs("colour")))],
        },
        TreeSpec {
            levels: vec![
                Level::new(f.sizes, Expansion::All),
                Level::new(f.objects, Expansion::Subitems(segs("colour"))),
            ],
        },
        TreeSpec {
            levels: vec![Level::new(f.sizes, Expansion::All), Level::new(f.colors, Expansion::All)],
        },
        TreeSpec {
            levels: vec![Level::new(ConceptId::STRING, Expansion::All)],
        },
    ];
    for spec in bad {
        let err = hierarchy_tree(&db, &spec, 5).unwrap_err();
        assert!(matches!(err, Error::InvalidTreeSpec(_)), "{err:?}");
    }
}
