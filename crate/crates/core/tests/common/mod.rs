#![allow(dead_code)]

pub mod gen;

use codm::schema::{ConceptDef, DimDef};
use codm::{ConceptId, Database, ItemRef, Value};

pub struct Obj {
    pub db: Database,
    pub sizes: ConceptId,
    pub colors: ConceptId,
    pub objects: ConceptId,
    pub s: [ItemRef; 2],
    pub c: [ItemRef; 2],
    pub o: [ItemRef; 3],
}

/// Sizes small/large, Colors green/red, Objects ⟨small,red⟩ ⟨large,green⟩ ⟨large,red⟩.
pub fn f_obj() -> Obj {
    f_obj_with(false, false)
}

pub fn f_obj_with(size_nullable: bool, sizes_local: bool) -> Obj {
    let mut db = Database::new();
    let mut sizes_def = ConceptDef::new("Sizes", vec![DimDef::new("label", "String")]);
    if sizes_local {
        sizes_def = sizes_def.local();
    }
    let sizes = db.define_concepts(vec![sizes_def]).unwrap()[0];
    let colors = db
        .define_concept("Colors", vec![DimDef::new("name", "String")])
        .unwrap();
    let mut size = DimDef::new("size", "Sizes");
    if size_nullable {
        size = size.nullable();
    }
    let objects = db
        .define_concept("Objects", vec![size, DimDef::new("colour", "Colors")])
        .unwrap();
    let s1 = db.insert(sizes, vec![Value::str("small")]).unwrap();
    let s2 = db.insert(sizes, vec![Value::str("large")]).unwrap();
    let c1 = db.insert(colors, vec![Value::str("green")]).unwrap();
    let c2 = db.insert(colors, vec![Value::str("red")]).unwrap();
    let o1 = db.insert(objects, vec![s1.into(), c2.into()]).unwrap();
    let o2 = db.insert(objects, vec![s2.into(), c1.into()]).unwrap();
    let o3 = db.insert(objects, vec![s2.into(), c2.into()]).unwrap();
    Obj {
        db,
        sizes,
        colors,
        objects,
        s: [s1, s2],
        c: [c1, c2],
        o: [o1, o2, o3],
    }
}

pub struct Sales {
    pub db: Database,
    pub countries: ConceptId,
    pub products: ConceptId,
    pub sales: ConceptId,
    /// DE, FR, IT
    pub k: [ItemRef; 3],
    /// food, tools
    pub p: [ItemRef; 2],
    pub t: [ItemRef; 3],
}

pub fn geo(db: &mut Database) -> (ConceptId, [ItemRef; 3]) {
    let countries = db
        .define_concept(
            "Countries",
            vec![
                DimDef::new("CountryName", "String"),
                DimDef::new("CountryPopulation", "Integer"),
            ],
        )
        .unwrap();
    let mut k = Vec::new();
    for (n, p) in [("Germany", 80), ("France", 50), ("Italy", 40)] {
        k.push(db.insert(countries, vec![Value::str(n), Value::Int(p)]).unwrap());
    }
    (countries, [k[0], k[1], k[2]])
}

pub fn f_geo() -> (Database, ConceptId, [ItemRef; 3]) {
    let mut db = Database::new();
    let (c, k) = geo(&mut db);
    (db, c, k)
}

pub fn f_sales() -> Sales {
    let mut db = Database::new();
    let (countries, k) = geo(&mut db);
    let products = db
        .define_concept("Products", vec![DimDef::new("cat", "String")])
        .unwrap();
    let p1 = db.insert(products, vec![Value::str("food")]).unwrap();
    let p2 = db.insert(products, vec![Value::str("tools")]).unwrap();
    let sales = db
        .define_concept(
            "Sales",
            vec![
                DimDef::new("country", "Countries"),
                DimDef::new("product", "Products"),
                DimDef::new("amount", "Integer"),
            ],
        )
        .unwrap();
    let t1 = db.insert(sales, vec![k[0].into(), p1.into(), Value::Int(10)]).unwrap();
    let t2 = db.insert(sales, vec![k[0].into(), p2.into(), Value::Int(5)]).unwrap();
    let t3 = db.insert(sales, vec![k[1].into(), p1.into(), Value::Int(7)]).unwrap();
    Sales {
        db,
        countries,
        products,
        sales,
        k,
        p: [p1, p2],
        t: [t1, t2, t3],
    }
}

pub fn strs(vals: &[Value]) -> Vec<String> {
    vals.iter()
        .map(|v| match v {
            Value::Str(s) => s.clone(),
            other => format!("{other:?}"),
        })
        .collect()
}
