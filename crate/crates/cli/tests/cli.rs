use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bilink_cli::read_scores;

fn bilink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilink"))
        .args(args)
        .env_remove("BILINK_DATA_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_log(dir: &Path, name: &str, rows: &[(u32, u32, u32, i64)]) -> String {
    let text: String = rows.iter().map(|(u, i, r, t)| format!("{u}\t{i}\t{r}\t{t}\n")).collect();
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Six users over eight items, every user with at least four ratings.
fn toy(dir: &Path) -> String {
    let mut rows = Vec::new();
    for u in 1..=6u32 {
        for i in 1..=8u32 {
            if (u * 3 + i * 5) % 7 < 4 {
                rows.push((u, i, 1 + (u + i) % 5, 1000 * (u as i64) + 10 * i as i64));
            }
        }
    }
    write_log(dir, "toy.data", &rows)
}

/// Two blocks with no edge between them: users 1-3 on items 1-3 and users
/// 4-6 on items 4-6.
fn two_islands(dir: &Path) -> String {
    let mut rows = Vec::new();
    for (users, items) in [(1..=3u32, 1..=3u32), (4..=6, 4..=6)] {
        for u in users.clone() {
            for i in items.clone() {
                rows.push((u, i, 3, 100 * u as i64 + ((i + u) % 3) as i64));
            }
        }
    }
    write_log(dir, "islands.data", &rows)
}

#[test]
fn ingest_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let o = bilink(&["ingest", "--data", &data]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["users"], 6);
    assert_eq!(v["items"], 8);
    assert!(v["ratings"].as_u64().unwrap() > 20);
}

#[test]
fn ingest_empty_file_warns() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_log(dir.path(), "empty.data", &[]);
    let o = bilink(&["ingest", "--data", &data]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ratings"], 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    assert_eq!(code(&bilink(&["ingest", "--data", &data, "--format", "xml"])), 1);
    assert_eq!(code(&bilink(&["score", "--data", &data, "--measures", "cn,nope"])), 1);
    assert_eq!(code(&bilink(&["ingest", "--data", "/no/such/file"])), 1);
    assert_eq!(code(&bilink(&["frobnicate"])), 1);
    assert_eq!(code(&bilink(&["--help"])), 0);
    let bad = write_log(dir.path(), "bad.data", &[]);
    fs::write(&bad, "1\t2\tx\t5\n").unwrap();
    let o = bilink(&["ingest", "--data", &bad]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn score_writes_one_row_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let out = dir.path().join("out");
    let o = bilink(&[
        "score", "--data", &data, "--out", out.to_str().unwrap(), "--measures", "cn,pa", "-s", "ratio=2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..5 {
        let cn = out.join(format!("fold{k}/cn.csv"));
        let text = fs::read_to_string(&cn).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config "));
        assert_eq!(lines.next().unwrap(), "user,item,label,score,defined");
        let sf = read_scores(&cn).unwrap();
        let pos = sf.pairs.iter().filter(|c| c.label).count();
        assert!(pos > 0);
        assert_eq!(sf.pairs.len(), 3 * pos);
        assert_eq!(read_scores(&out.join(format!("fold{k}/pa.csv"))).unwrap().pairs, sf.pairs);
    }
}

#[test]
fn cop_marks_disjoint_pairs_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_islands(dir.path());
    let out = dir.path().join("out");
    let o = bilink(&[
        "score", "--data", &data, "--out", out.to_str().unwrap(), "--measures", "cop", "-s", "split=holdout",
        "-s", "train_fraction=0.6", "-s", "ratio=2", "-s", "cop_max_len=5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sf = read_scores(&out.join("fold0/cop.csv")).unwrap();
    let mut crossing = 0;
    for (c, s) in sf.pairs.iter().zip(&sf.scores) {
        if (c.user.0 <= 3) != (c.item.0 <= 3) {
            crossing += 1;
            assert_eq!(*s, None, "{c:?}");
        }
    }
    assert!(crossing > 0);
    assert!(sf.scores.iter().any(Option::is_some));
    let cliques = fs::read_to_string(out.join("fold0/bcliques.txt")).unwrap();
    assert!(cliques.starts_with("# config "));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path());
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = bilink(&[
            "score", "--data", &data, "--out", out.to_str().unwrap(), "--measures", "all", "--threads", threads,
            "-s", "ratio=3", "-s", "cop_max_len=5",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(code(&bilink(&["evaluate", out.to_str().unwrap()])), 0);
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let mut n = 0;
    for k in 0..5 {
        for e in fs::read_dir(a.join(format!("fold{k}"))).unwrap() {
            let p = e.unwrap().path();
            let q = b.join(format!("fold{k}")).join(p.file_name().unwrap());
            assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap(), "{}", p.display());
            n += 1;
        }
    }
    assert_eq!(n, 5 * 15);
    for f in ["report.json", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn evaluate_perfect_scorer_and_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("# config h\nuser,item,label,score,defined\n");
    for k in 0..20u32 {
        let label = k % 4 == 0;
        text.push_str(&format!("{},{},{},{},true\n", 1 + k % 5, k, label as u8, if label { 1.0 } else { 0.0 }));
    }
    fs::write(dir.path().join("perfect.csv"), text).unwrap();
    let o = bilink(&["evaluate", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"][0]["measure"], "perfect");
    assert_eq!(report["summary"][0]["auroc_mean"], 1.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("perfect"));

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&bilink(&["evaluate", empty.path().to_str().unwrap()])), 1);
    fs::write(empty.path().join("broken.csv"), "user,item\n1,2\n").unwrap();
    assert_eq!(code(&bilink(&["evaluate", empty.path().to_str().unwrap()])), 1);
}

fn recommend(data: &str, user: &str, k: &str) -> Output {
    bilink(&["recommend", "--data", data, "--user", user, "-k", k, "-m", "pa"])
}

#[test]
fn recommend_ranks_unseen_items() {
    let dir = tempfile::tempdir().unwrap();
    // User 1 rated item 1 only; items 2, 3, 4 have degrees 1, 3, 2.
    let data = write_log(
        dir.path(),
        "r.data",
        &[(1, 1, 5, 0), (2, 2, 3, 0), (2, 3, 3, 0), (3, 3, 3, 0), (4, 3, 3, 0), (3, 4, 3, 0), (4, 4, 3, 0), (2, 1, 1, 0)],
    );
    let o = recommend(&data, "1", "10");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let items: Vec<String> = String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(items, ["3", "4", "2"]);
    assert_eq!(String::from_utf8_lossy(&recommend(&data, "1", "1").stdout).lines().count(), 1);

    let full = write_log(dir.path(), "f.data", &[(1, 1, 5, 0), (1, 2, 5, 0), (2, 1, 3, 0)]);
    let o = recommend(&full, "1", "5");
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert_eq!(code(&recommend(&full, "99", "5")), 1);
}
