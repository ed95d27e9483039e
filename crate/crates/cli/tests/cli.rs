use std::io::Write;
use std::process::{Command, Output, Stdio};

use codm::snapshot::save;
use codm_cli::{run_script, Format, Session};

const FOBJ: &str = "\
-- objects, sizes and colours
concept Colors { name: String }
concept Sizes { label: String }
concept Objects { size: Sizes, colour: Colors }
Colors <\"green\">
Colors <\"red\">
Sizes <\"small\">
Sizes <\"large\">
Objects <Sizes#1, Colors#2>
Objects <Sizes#2, Colors#1>
Objects <Sizes#2, Colors#2>
";

fn session(script: &str) -> Session {
    let mut s = Session::new(Format::Table);
    let mut out = String::new();
    run_script(&mut s, script, &mut out).unwrap();
    s
}

fn exec(s: &mut Session, line: &str) -> anyhow::Result<String> {
    let mut out = String::new();
    s.execute(line, &mut out).map(|_| out)
}

fn codm(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_codm"))
        .args(args)
        .env_remove("CODM_FORMAT")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn script_builds_and_queries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fobj.codm");
    std::fs::write(&path, format!("{FOBJ}{{o:Objects}} <o, o.colour.name>\n")).unwrap();
    let out = codm(&["run", path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(
        stdout,
        "o                 | name\n\
         ------------------+------\n\
         Objects#1 (small) | red\n\
         Objects#2 (large) | green\n\
         Objects#3 (large) | red\n\
         (3 rows)\n"
    );
}

#[test]
fn script_stops_at_the_failing_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.codm");
    std::fs::write(&path, "concept A { x: Integer }\nconcept B { b: B }\nconcept C { c: A }\n").unwrap();
    let out = codm(&["run", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("line 2"), "{}", text(&out.stderr));
}

#[test]
fn empty_script_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.codm");
    std::fs::write(&path, "").unwrap();
    let out = codm(&["run", path.to_str().unwrap()], None);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn infer_names_the_only_colour() {
    let mut s = session(FOBJ);
    let out = exec(&mut s, "infer Sizes={Sizes#1} -> Colors").unwrap();
    assert!(out.contains("red") && !out.contains("green"), "{out}");
    let out = exec(&mut s, "infer Sizes={Sizes#2} -> Colors").unwrap();
    assert!(out.contains("red") && out.contains("green"), "{out}");
}

#[test]
fn failed_commands_leave_state_unchanged() {
    let mut s = session(FOBJ);
    let before = save(&s.db);
    for bad in [
        "{o:Objects | o.size ==}",
        "Objects <Sizes#9, Colors#1>",
        "update Objects#1.size = Colors#1",
        "concept Objects { x: Integer }",
        "delete Objects#42",
        "frobnicate",
        "infer Sizes={Sizes#1} -> Nowhere",
    ] {
        assert!(exec(&mut s, bad).is_err(), "{bad}");
        assert_eq!(save(&s.db), before, "{bad}");
    }
    let mut s = session(FOBJ);
    exec(&mut s, "constraint Colors.named := name != \"\"").unwrap();
    let before = save(&s.db);
    assert!(exec(&mut s, "Colors <\"\">").is_err());
    assert_eq!(save(&s.db), before);
}

#[test]
fn repl_keeps_going_after_errors() {
    let out = codm(&["repl"], Some(&format!("{FOBJ}{{o:Objects |}}\n{{Sizes}}\nquit\n{{Colors}}\n")));
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.contains("error:"), "{stdout}");
    assert!(stdout.contains("Sizes#2 (large)"), "{stdout}");
    assert!(!stdout.contains("Colors#1 (green)"), "{stdout}");
}

#[test]
fn gc_reports_collected_items() {
    let mut s = session(
        "concept Tags { t: String } local\nconcept Posts { tag: Tags }\nTags <\"x\">\nTags <\"y\">\nPosts <Tags#1>\nPosts <Tags#2>\n",
    );
    assert_eq!(exec(&mut s, "gc").unwrap(), "collected: none\n");
    let out = exec(&mut s, "delete Posts#1").unwrap();
    assert!(out.starts_with("deleted: Posts#1"), "{out}");
    let out = exec(&mut s, "gc").unwrap();
    assert!(out == "collected: none\n" || out == "collected: Tags#1\n", "{out}");
    let tags = exec(&mut s, "{Tags}").unwrap();
    assert!(!tags.contains("Tags#1"), "{tags}");
}

#[test]
fn deletion_output_lists_cascades() {
    let mut s = session(FOBJ);
    let out = exec(&mut s, "delete Sizes#2").unwrap();
    assert_eq!(out, "deleted: Objects#2, Objects#3, Sizes#2\n");
}

#[test]
fn snapshots_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.snap");
    let b = dir.path().join("b.snap");
    let mut s = session(FOBJ);
    exec(&mut s, "mv Sizes.fits -> Colors").unwrap();
    exec(&mut s, "add Sizes#1.fits Colors#2").unwrap();
    exec(&mut s, &format!("save {}", a.display())).unwrap();
    exec(&mut s, &format!("save {}", b.display())).unwrap();
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    assert!(ta.contains("Objects <Sizes#1, Colors#2>\n"));

    let mut t = Session::new(Format::Table);
    exec(&mut t, &format!("load {}", a.display())).unwrap();
    assert_eq!(save(&t.db), ta);
    let r = |text: &str| t.db.parse_ref(text).unwrap();
    assert_eq!(t.db.mv_get(r("Sizes#1"), "fits").unwrap(), [r("Colors#2")]);

    let empty = dir.path().join("empty.snap");
    let mut e = Session::new(Format::Table);
    exec(&mut e, &format!("save {}", empty.display())).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), "#schema\n");
}

#[test]
fn dangling_snapshot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.snap");
    std::fs::write(
        &path,
        "#schema\nconcept Sizes { label: String }\nconcept Objects { size: Sizes }\n#data\nObjects <Sizes#99>\n",
    )
    .unwrap();
    let mut s = Session::new(Format::Table);
    let err = exec(&mut s, &format!("load {}", path.display())).unwrap_err();
    assert!(format!("{err:#}").contains("Sizes#99"), "{err:#}");
    assert_eq!(save(&s.db), "#schema\n");
}

#[test]
fn script_and_repl_agree() {
    let dir = tempfile::tempdir().unwrap();
    let script = format!(
        "{FOBJ}mv Sizes.fits -> Colors\nadd Sizes#2.fits Colors#1\nupdate Objects#3.colour = Colors#1\ndelete Objects#1\ngc\n"
    );
    let via_script = dir.path().join("script.snap");
    let via_repl = dir.path().join("repl.snap");
    let path = dir.path().join("s.codm");
    std::fs::write(&path, format!("{script}save {}\n", via_script.display())).unwrap();
    assert!(codm(&["run", path.to_str().unwrap()], None).status.success());
    let out = codm(&["repl"], Some(&format!("{script}save {}\n", via_repl.display())));
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(via_script).unwrap(),
        std::fs::read_to_string(via_repl).unwrap()
    );
}

#[test]
fn query_subcommand_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("f.snap");
    std::fs::write(&snap, save(&session(FOBJ).db)).unwrap();
    let q = "{o:Objects | o.colour.name == \"red\"} <o, label = o.size.label>";
    let out = codm(&["query", "-d", snap.to_str().unwrap(), q, "--format", "csv"], None);
    assert_eq!(text(&out.stdout), "o,label\nObjects#1,small\nObjects#3,large\n");
    let out = codm(&["--format", "jsonl", "query", "-d", snap.to_str().unwrap(), q], None);
    assert_eq!(
        text(&out.stdout),
        "{\"o\":\"Objects#1\",\"label\":\"small\"}\n{\"o\":\"Objects#3\",\"label\":\"large\"}\n"
    );
    let out = Command::new(env!("CARGO_BIN_EXE_codm"))
        .args(["query", "-d", snap.to_str().unwrap(), "{Sizes}"])
        .env("CODM_FORMAT", "csv")
        .output()
        .unwrap();
    assert_eq!(text(&out.stdout), "Sizes\nSizes#1\nSizes#2\n");
}

#[test]
fn cubes_and_level_changes() {
    let mut s = session(
        "concept Regions { name: String }\n\
         concept Countries { name: String, region: Regions }\n\
         concept Sales { country: Countries, amount: Integer }\n\
         Regions <\"west\">\n\
         Countries <\"DE\", Regions#1>\n\
         Countries <\"FR\", Regions#1>\n\
         Sales <Countries#1, 10>\n\
         Sales <Countries#2, 5>\n\
         Sales <Countries#1, 1>\n",
    );
    s.format = Format::Csv;
    assert_eq!(
        exec(&mut s, "cube Sales by country sum amount").unwrap(),
        "Countries,sum\nCountries#1,11\nCountries#2,5\n"
    );
    assert_eq!(exec(&mut s, "rollup 0 region").unwrap(), "Regions,sum\nRegions#1,16\n");
    assert_eq!(
        exec(&mut s, "drilldown 0 region").unwrap(),
        "Countries,sum\nCountries#1,11\nCountries#2,5\n"
    );
    assert_eq!(
        exec(&mut s, "cube Sales by country size where amount > 4").unwrap(),
        "Countries,size\nCountries#1,1\nCountries#2,1\n"
    );
    assert!(exec(&mut s, "rollup 3 region").is_err());
}

#[test]
fn trees_expand_and_filter() {
    let mut s = session(
        "concept Countries { name: String }\n\
         concept Sales { country: Countries, amount: Integer }\n\
         Countries <\"DE\">\n\
         Countries <\"FR\">\n\
         Sales <Countries#1, 10>\n\
         Sales <Countries#2, 5>\n\
         Sales <Countries#1, 1>\n",
    );
    assert_eq!(
        exec(&mut s, "tree Countries show name").unwrap(),
        "⊤\n  Countries#1 (DE) [name=DE]\n  Countries#2 (FR) [name=FR]\n"
    );
    let out = exec(&mut s, "expand Sales by country show amount").unwrap();
    assert_eq!(
        out,
        "⊤\n  Countries#1 (DE) [name=DE]\n    Sales#1 (DE) [amount=10]\n    Sales#3 (DE) [amount=1]\n  \
         Countries#2 (FR) [name=FR]\n    Sales#2 (FR) [amount=5]\n"
    );
    let out = exec(&mut s, "filter 1 amount > 2").unwrap();
    assert!(!out.contains("Sales#3"), "{out}");
    assert!(out.contains("Sales#2"), "{out}");
    assert!(exec(&mut s, "filter 7 amount > 2").is_err());
}

#[test]
fn formats_are_switchable() {
    let mut s = session(FOBJ);
    exec(&mut s, "format csv").unwrap();
    assert_eq!(exec(&mut s, "{Colors} <name>").unwrap(), "name\ngreen\nred\n");
    assert!(exec(&mut s, "format xml").is_err());
    assert_eq!(s.format, Format::Csv);
}
