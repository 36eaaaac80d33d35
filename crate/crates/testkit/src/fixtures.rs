//! Three small benchmark-style databases with deterministic contents.
//!
//! Every table has a primary key, and every foreign key points at a
//! single-column primary key, so joins along foreign keys never multiply the
//! rows of the referencing table.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::{params_from_iter, Connection};
use serde_json::{json, Value as Json};
use splitlink_core::catalog::{ColumnType, DatabaseCatalog, ForeignKey, TableDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Real,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    /// SQL literal text. Reals always carry a fractional part.
    pub fn literal(&self) -> String {
        match self {
            Value::Null => "NULL".into(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => format!("{r:?}"),
            Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }
}

impl rusqlite::ToSql for Value {
    fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
        use rusqlite::types::{ToSqlOutput, Value as V};
        Ok(ToSqlOutput::Owned(match self {
            Value::Null => V::Null,
            Value::Int(i) => V::Integer(*i),
            Value::Real(r) => V::Real(*r),
            Value::Text(s) => V::Text(s.clone()),
        }))
    }
}

#[derive(Debug, Clone)]
pub struct FixtureColumn {
    pub name: &'static str,
    pub kind: Kind,
    pub nullable: bool,
}

#[derive(Debug, Clone)]
pub struct FixtureTable {
    pub name: &'static str,
    pub columns: Vec<FixtureColumn>,
    pub primary_key: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl FixtureTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Distinct non-null values of a column, in first-seen order.
    pub fn values(&self, column: &str) -> Vec<Value> {
        let Some(j) = self.column_index(column) else {
            return Vec::new();
        };
        let mut out: Vec<Value> = Vec::new();
        for row in &self.rows {
            if row[j] != Value::Null && !out.contains(&row[j]) {
                out.push(row[j].clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FixtureDb {
    pub db_id: &'static str,
    pub tables: Vec<FixtureTable>,
    /// `(from_table, from_column, to_table, to_column)`.
    pub foreign_keys: Vec<(&'static str, &'static str, &'static str, &'static str)>,
}

impl FixtureDb {
    pub fn table(&self, name: &str) -> Option<&FixtureTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn catalog(&self) -> DatabaseCatalog {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let cols: Vec<(&str, ColumnType)> = t
                    .columns
                    .iter()
                    .map(|c| {
                        (
                            c.name,
                            if c.kind == Kind::Text {
                                ColumnType::Text
                            } else {
                                ColumnType::Number
                            },
                        )
                    })
                    .collect();
                TableDef::new(t.name, &cols, &t.primary_key)
            })
            .collect();
        let fks = self
            .foreign_keys
            .iter()
            .map(|(a, b, c, d)| ForeignKey::new(a, b, c, d))
            .collect();
        DatabaseCatalog::new(self.db_id, tables, fks).expect("fixture schemas are valid")
    }

    /// One entry of a benchmark `tables.json` file.
    pub fn tables_json(&self) -> Json {
        let mut column_names = vec![json!([-1, "*"])];
        let mut column_names_original = vec![json!([-1, "*"])];
        let mut column_types = vec![json!("text")];
        let mut index_of = Vec::new();
        for (ti, t) in self.tables.iter().enumerate() {
            for c in &t.columns {
                index_of.push((t.name, c.name));
                column_names_original.push(json!([ti, c.name]));
                column_names.push(json!([ti, c.name.to_lowercase().replace('_', " ")]));
                column_types.push(json!(if c.kind == Kind::Text { "text" } else { "number" }));
            }
        }
        let idx = |t: &str, c: &str| {
            index_of
                .iter()
                .position(|&(a, b)| a == t && b == c)
                .expect("known column")
                + 1
        };
        let primary_keys: Vec<Json> = self
            .tables
            .iter()
            .flat_map(|t| t.primary_key.iter().map(move |k| (t.name, *k)))
            .map(|(t, c)| json!(idx(t, c)))
            .collect();
        let foreign_keys: Vec<Json> = self
            .foreign_keys
            .iter()
            .map(|(a, b, c, d)| json!([idx(a, b), idx(c, d)]))
            .collect();
        json!({
            "db_id": self.db_id,
            "table_names_original": self.tables.iter().map(|t| t.name).collect::<Vec<_>>(),
            "table_names": self.tables.iter().map(|t| t.name.to_lowercase().replace('_', " ")).collect::<Vec<_>>(),
            "column_names_original": column_names_original,
            "column_names": column_names,
            "column_types": column_types,
            "primary_keys": primary_keys,
            "foreign_keys": foreign_keys,
        })
    }

    pub fn write_sqlite(&self, path: &Path) -> rusqlite::Result<()> {
        let conn = Connection::open(path)?;
        for t in &self.tables {
            let mut parts: Vec<String> = t
                .columns
                .iter()
                .map(|c| {
                    let ty = match c.kind {
                        Kind::Int => "INTEGER",
                        Kind::Real => "REAL",
                        Kind::Text => "TEXT",
                    };
                    format!("\"{}\" {ty}", c.name)
                })
                .collect();
            parts.push(format!(
                "PRIMARY KEY ({})",
                t.primary_key
                    .iter()
                    .map(|k| format!("\"{k}\""))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
            for (_, col, to_t, to_c) in self.foreign_keys.iter().filter(|fk| fk.0 == t.name) {
                parts.push(format!("FOREIGN KEY (\"{col}\") REFERENCES \"{to_t}\" (\"{to_c}\")"));
            }
            conn.execute(&format!("CREATE TABLE \"{}\" ({})", t.name, parts.join(", ")), [])?;
            let marks = vec!["?"; t.columns.len()].join(", ");
            let mut insert = conn.prepare(&format!("INSERT INTO \"{}\" VALUES ({marks})", t.name))?;
            for row in &t.rows {
                insert.execute(params_from_iter(row.iter()))?;
            }
        }
        Ok(())
    }
}

/// How a column's values are drawn.
enum Gen {
    Serial(i64),
    Names(&'static [&'static str]),
    Pick(&'static [&'static str]),
    Ints(i64, i64),
    Reals(f64, f64),
    Ref(&'static str),
}

struct ColSpec {
    name: &'static str,
    gen: Gen,
    null_rate: f64,
}

fn col(name: &'static str, gen: Gen) -> ColSpec {
    ColSpec {
        name,
        gen,
        null_rate: 0.0,
    }
}

fn nullable(name: &'static str, gen: Gen, null_rate: f64) -> ColSpec {
    ColSpec { name, gen, null_rate }
}

struct TableSpec {
    name: &'static str,
    rows: usize,
    columns: Vec<ColSpec>,
    primary_key: Vec<&'static str>,
}

fn build(
    db_id: &'static str,
    seed: u64,
    specs: Vec<TableSpec>,
    foreign_keys: Vec<(&'static str, &'static str, &'static str, &'static str)>,
) -> FixtureDb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tables: Vec<FixtureTable> = Vec::new();
    for spec in specs {
        let mut rows: Vec<Vec<Value>> = Vec::new();
        let key_idx: Vec<usize> = spec
            .primary_key
            .iter()
            .map(|k| spec.columns.iter().position(|c| c.name == *k).expect("key column"))
            .collect();
        let mut attempts = 0;
        while rows.len() < spec.rows {
            attempts += 1;
            assert!(attempts < spec.rows * 100, "cannot fill {} with unique keys", spec.name);
            let i = rows.len();
            let row: Vec<Value> = spec
                .columns
                .iter()
                .map(|c| {
                    if c.null_rate > 0.0 && rng.gen_bool(c.null_rate) {
                        return Value::Null;
                    }
                    match &c.gen {
                        Gen::Serial(start) => Value::Int(start + i as i64),
                        Gen::Names(list) => Value::Text(list[i % list.len()].to_string()),
                        Gen::Pick(list) => Value::Text(list.choose(&mut rng).expect("nonempty").to_string()),
                        Gen::Ints(lo, hi) => Value::Int(rng.gen_range(*lo..=*hi)),
                        Gen::Reals(lo, hi) => Value::Real((rng.gen_range(*lo..*hi) * 100.0).round() / 100.0),
                        Gen::Ref(table) => {
                            let target = tables
                                .iter()
                                .find(|t| t.name == *table)
                                .expect("referenced table built first");
                            target.rows.choose(&mut rng).expect("referenced table has rows")[0].clone()
                        }
                    }
                })
                .collect();
            let key: Vec<&Value> = key_idx.iter().map(|&k| &row[k]).collect();
            if rows
                .iter()
                .any(|r| key_idx.iter().map(|&k| &r[k]).eq(key.iter().copied()))
            {
                continue;
            }
            rows.push(row);
        }
        tables.push(FixtureTable {
            name: spec.name,
            columns: spec
                .columns
                .iter()
                .map(|c| FixtureColumn {
                    name: c.name,
                    kind: match c.gen {
                        Gen::Serial(_) | Gen::Ints(..) => Kind::Int,
                        Gen::Reals(..) => Kind::Real,
                        Gen::Names(_) | Gen::Pick(_) => Kind::Text,
                        Gen::Ref(_) => Kind::Int,
                    },
                    nullable: c.null_rate > 0.0,
                })
                .collect(),
            primary_key: spec.primary_key,
            rows,
        });
    }
    FixtureDb {
        db_id,
        tables,
        foreign_keys,
    }
}

fn concert_singer() -> FixtureDb {
    use Gen::*;
    build(
        "concert_singer",
        11,
        vec![
            TableSpec {
                name: "stadium",
                rows: 9,
                columns: vec![
                    col("Stadium_ID", Serial(1)),
                    col(
                        "Location",
                        Pick(&[
                            "Raith Rovers",
                            "Ayr United",
                            "East Fife",
                            "Queen's Park",
                            "Stirling Albion",
                        ]),
                    ),
                    col(
                        "Name",
                        Names(&[
                            "Stark's Park",
                            "Somerset Park",
                            "Bayview Stadium",
                            "Hampden Park",
                            "Forthbank Stadium",
                            "Gayfield Park",
                            "Recreation Park",
                            "Balmoor",
                            "Glebe Park",
                        ]),
                    ),
                    col("Capacity", Ints(2000, 52500)),
                    col("Highest", Ints(800, 5000)),
                    col("Lowest", Ints(100, 700)),
                    col("Average", Reals(200.0, 3000.0)),
                ],
                primary_key: vec!["Stadium_ID"],
            },
            TableSpec {
                name: "singer",
                rows: 14,
                columns: vec![
                    col("Singer_ID", Serial(1)),
                    col(
                        "Name",
                        Names(&[
                            "Joe Sharp",
                            "Timbaland",
                            "Justin Brown",
                            "Rose White",
                            "John Nizinik",
                            "Tribal King",
                            "Ana Lopez",
                            "Mei Chen",
                            "Omar Haddad",
                            "Lena Fischer",
                            "Ravi Patel",
                            "Sara Berg",
                            "Tom Okafor",
                            "Ines Duarte",
                        ]),
                    ),
                    col("Country", Pick(&["Netherlands", "United States", "France", "Japan"])),
                    col(
                        "Song_Name",
                        Pick(&["You", "Dangerous", "Hey Oh", "Sun", "Gentleman", "Love"]),
                    ),
                    col("Song_release_year", Pick(&["1992", "2003", "2008", "2013", "2016"])),
                    col("Age", Ints(20, 55)),
                    col("Is_male", Pick(&["T", "F"])),
                ],
                primary_key: vec!["Singer_ID"],
            },
            TableSpec {
                name: "concert",
                rows: 12,
                columns: vec![
                    col("concert_ID", Serial(1)),
                    col(
                        "concert_Name",
                        Pick(&["Auditions", "Super bootcamp", "Home Visits", "Week 1", "Week 2"]),
                    ),
                    nullable(
                        "Theme",
                        Pick(&["Free choice", "Bleeding Love", "Wide Awake", "Happy Tonight"]),
                        0.15,
                    ),
                    col("Stadium_ID", Ref("stadium")),
                    col("Year", Pick(&["2014", "2015", "2016"])),
                ],
                primary_key: vec!["concert_ID"],
            },
            TableSpec {
                name: "singer_in_concert",
                rows: 24,
                columns: vec![col("concert_ID", Ref("concert")), col("Singer_ID", Ref("singer"))],
                primary_key: vec!["concert_ID", "Singer_ID"],
            },
        ],
        vec![
            ("concert", "Stadium_ID", "stadium", "Stadium_ID"),
            ("singer_in_concert", "concert_ID", "concert", "concert_ID"),
            ("singer_in_concert", "Singer_ID", "singer", "Singer_ID"),
        ],
    )
}

fn pets() -> FixtureDb {
    use Gen::*;
    build(
        "pets_1",
        22,
        vec![
            TableSpec {
                name: "Student",
                rows: 18,
                columns: vec![
                    col("StuID", Serial(1001)),
                    col(
                        "LName",
                        Pick(&["Smith", "Kim", "Jones", "Lee", "Kumar", "Adams", "Nelson"]),
                    ),
                    col(
                        "Fname",
                        Pick(&["Linda", "Tracy", "Shiela", "Dinesh", "Paul", "Andy", "Lisa", "Jandy"]),
                    ),
                    col("Age", Ints(16, 27)),
                    col("Sex", Pick(&["M", "F"])),
                    col("Major", Ints(520, 600)),
                    nullable("Advisor", Ints(1100, 9000), 0.1),
                    col("city_code", Pick(&["BAL", "HKG", "WAS", "PHL", "NYC", "PIT"])),
                ],
                primary_key: vec!["StuID"],
            },
            TableSpec {
                name: "Pets",
                rows: 12,
                columns: vec![
                    col("PetID", Serial(2001)),
                    col("PetType", Pick(&["cat", "dog", "bird"])),
                    col("pet_age", Ints(1, 12)),
                    col("weight", Reals(1.0, 25.0)),
                ],
                primary_key: vec!["PetID"],
            },
            TableSpec {
                name: "Has_Pet",
                rows: 15,
                columns: vec![col("StuID", Ref("Student")), col("PetID", Ref("Pets"))],
                primary_key: vec!["StuID", "PetID"],
            },
        ],
        vec![
            ("Has_Pet", "StuID", "Student", "StuID"),
            ("Has_Pet", "PetID", "Pets", "PetID"),
        ],
    )
}

fn store() -> FixtureDb {
    use Gen::*;
    build(
        "store_1",
        33,
        vec![
            TableSpec {
                name: "suppliers",
                rows: 6,
                columns: vec![
                    col("supplier_id", Serial(1)),
                    col(
                        "supplier_name",
                        Names(&["Acme", "Globex", "Initech", "Umbrella", "Hooli", "Vandelay"]),
                    ),
                    col("country", Pick(&["USA", "Canada", "Mexico"])),
                ],
                primary_key: vec!["supplier_id"],
            },
            TableSpec {
                name: "products",
                rows: 15,
                columns: vec![
                    col("product_id", Serial(1)),
                    col(
                        "product_name",
                        Names(&[
                            "Hammer", "Rake", "Kettle", "Yo-yo", "Wrench", "Shovel", "Toaster", "Kite", "Drill",
                            "Hose", "Blender", "Puzzle", "Saw", "Planter", "Whisk",
                        ]),
                    ),
                    col("category", Pick(&["tools", "garden", "kitchen", "toys"])),
                    col("price", Reals(1.0, 200.0)),
                    col("supplier_id", Ref("suppliers")),
                ],
                primary_key: vec!["product_id"],
            },
            TableSpec {
                name: "customers",
                rows: 15,
                columns: vec![
                    col("customer_id", Serial(1)),
                    col(
                        "customer_name",
                        Names(&[
                            "Ada Byron",
                            "Sean O'Brien",
                            "Grace Hopper",
                            "Alan Turing",
                            "Edsger Dijkstra",
                            "Barbara Liskov",
                            "Donald Knuth",
                            "Frances Allen",
                            "Ken Thompson",
                            "Radia Perlman",
                            "John Backus",
                            "Jean Sammet",
                            "Niklaus Wirth",
                            "Margaret Hamilton",
                            "Tony Hoare",
                        ]),
                    ),
                    nullable("city", Pick(&["Boston", "Austin", "Denver", "Seattle"]), 0.15),
                    col("credit_limit", Reals(100.0, 5000.0)),
                    col("join_year", Ints(2010, 2023)),
                ],
                primary_key: vec!["customer_id"],
            },
            TableSpec {
                name: "orders",
                rows: 25,
                columns: vec![
                    col("order_id", Serial(1)),
                    col("customer_id", Ref("customers")),
                    col(
                        "order_date",
                        Pick(&["2023-01-05", "2023-02-11", "2023-03-30", "2023-06-18", "2023-09-02"]),
                    ),
                    col("status", Pick(&["shipped", "pending", "cancelled"])),
                ],
                primary_key: vec!["order_id"],
            },
            TableSpec {
                name: "order_items",
                rows: 40,
                columns: vec![
                    col("order_id", Ref("orders")),
                    col("product_id", Ref("products")),
                    col("quantity", Ints(1, 10)),
                ],
                primary_key: vec!["order_id", "product_id"],
            },
        ],
        vec![
            ("products", "supplier_id", "suppliers", "supplier_id"),
            ("orders", "customer_id", "customers", "customer_id"),
            ("order_items", "order_id", "orders", "order_id"),
            ("order_items", "product_id", "products", "product_id"),
        ],
    )
}

/// The three fixture databases, in a fixed order.
pub fn fixture_dbs() -> Vec<FixtureDb> {
    vec![concert_singer(), pets(), store()]
}

/// Fixture databases materialized on disk in the benchmark layout:
/// `tables.json` plus `database/<db_id>/<db_id>.sqlite`.
pub struct FixtureWorkspace {
    pub dir: tempfile::TempDir,
    pub dbs: Vec<FixtureDb>,
}

impl FixtureWorkspace {
    pub fn create() -> io::Result<Self> {
        let dir = tempfile::tempdir()?;
        let dbs = fixture_dbs();
        let json = Json::Array(dbs.iter().map(FixtureDb::tables_json).collect());
        fs::write(dir.path().join("tables.json"), serde_json::to_string_pretty(&json)?)?;
        for db in &dbs {
            let path = dir.path().join("database").join(db.db_id);
            fs::create_dir_all(&path)?;
            db.write_sqlite(&path.join(format!("{}.sqlite", db.db_id)))
                .map_err(io::Error::other)?;
        }
        Ok(Self { dir, dbs })
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn tables_json(&self) -> PathBuf {
        self.root().join("tables.json")
    }

    pub fn db_root(&self) -> PathBuf {
        self.root().join("database")
    }

    pub fn db_file(&self, db_id: &str) -> PathBuf {
        self.db_root().join(db_id).join(format!("{db_id}.sqlite"))
    }

    pub fn db(&self, db_id: &str) -> &FixtureDb {
        self.dbs.iter().find(|d| d.db_id == db_id).expect("fixture db")
    }
}

/// Writes a benchmark-style example file: a JSON array of
/// `{db_id, question, query}` objects.
pub fn write_examples(path: &Path, examples: &[(String, String, String)]) -> io::Result<()> {
    let items: Vec<Json> = examples
        .iter()
        .map(|(db_id, question, query)| json!({"db_id": db_id, "question": question, "query": query}))
        .collect();
    fs::write(path, serde_json::to_string_pretty(&Json::Array(items))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_valid() {
        let a = fixture_dbs();
        let b = fixture_dbs();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tables_json(), y.tables_json());
            for (s, t) in x.tables.iter().zip(&y.tables) {
                assert_eq!(s.rows, t.rows);
            }
            let cat = x.catalog();
            assert_eq!(cat.tables.len(), x.tables.len());
        }
        assert_eq!(a[2].tables.len(), 5);
    }

    #[test]
    fn workspace_databases_open() {
        let ws = FixtureWorkspace::create().unwrap();
        for db in &ws.dbs {
            let conn = Connection::open(ws.db_file(db.db_id)).unwrap();
            for t in &db.tables {
                let n: i64 = conn
                    .query_row(&format!("SELECT count(*) FROM \"{}\"", t.name), [], |r| r.get(0))
                    .unwrap();
                assert_eq!(n as usize, t.rows.len());
            }
        }
    }
}
