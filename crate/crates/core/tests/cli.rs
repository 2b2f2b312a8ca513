use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_implauth");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_owned()
}

struct Serve(Child);

impl Drop for Serve {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(data: &Path) -> (Serve, String) {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let child = Command::new(BIN)
        .args(["serve", "--listen", &addr, "--data"])
        .arg(data)
        .args(["--seed", "11"])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    while std::net::TcpStream::connect(&addr).is_err() {
        assert!(Instant::now() < deadline, "server did not start");
        thread::sleep(Duration::from_millis(20));
    }
    (Serve(child), addr)
}

#[test]
fn oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str, body: &str| {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        path.to_str().unwrap().to_owned()
    };
    let (x, y) = (p("x", "1\n2\n3\n"), p("y", "2\n3\n4\n"));
    assert_eq!(stdout(&run(&["oracle", "intersection", &x, &y, "--integer-features"])), "2");
    let (u, v) = (p("u", "2 0 3"), p("v", "1,1,3"));
    assert_eq!(stdout(&run(&["oracle", "l1", &u, &v])), "2");
    let (x4, y5, sim) = (p("x4", "4\n"), p("y5", "5\n"), p("sim", "5 4 1\n5 5 2\n5 6 1\n"));
    assert_eq!(stdout(&run(&["oracle", "weighted", &x4, &y5, "--similarity", &sim, "--integer-features"])), "1");
    let bad = run(&["oracle", "l1", &u, &x4]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn serve_setup_auth_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = serve(&dir.path().join("store"));
    let write = |name: &str, body: &str| {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        path.to_str().unwrap().to_owned()
    };
    let secret = dir.path().join("alice.secret");
    let secret = secret.to_str().unwrap();
    let profile = write("profile.txt", "cell-17\nwifi-home\napp-mail\napp-maps\n");
    let out = run(&[
        "setup", "--connect", &addr, "--user", "alice", "--features", &profile, "--key-bits", "256", "--secret", secret,
        "--seed", "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(secret).exists());

    let good = write("good.txt", "wifi-home\napp-mail\ncell-99\n");
    let out = run(&["auth", "--connect", &addr, "--secret", secret, "--features", &good, "--seed", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("ACCEPT matches=2"), "{}", stdout(&out));

    let bad = write("bad.txt", "cell-1\ncell-2\n");
    let out = run(&["auth", "--connect", &addr, "--secret", secret, "--features", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("REJECT matches=0"));

    let out = run(&["auth", "--connect", &addr, "--secret", "/nonexistent/secret", "--features", &bad]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn case_c_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = serve(&dir.path().join("store"));
    let u = dir.path().join("u.txt");
    let v = dir.path().join("v.txt");
    fs::write(&u, "2 0 3\n").unwrap();
    fs::write(&v, "1 1 3\n").unwrap();
    let secret = dir.path().join("c.secret");
    let out = Command::new(BIN)
        .args(["setup", "--connect", &addr, "--user", "carol", "--mode", "case-c", "--cap", "4", "--key-bits", "256"])
        .arg("--vector")
        .arg(&u)
        .arg("--secret")
        .arg(&secret)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(BIN).args(["auth", "--connect", &addr]).arg("--secret").arg(&secret).arg("--vector").arg(&v).output().unwrap();
    // L1 = 2 <= ceil(3 * 4 / 4) = 3.
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("dissimilarity=2"), "{}", stdout(&out));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = Command::new(BIN)
        .args(["bench", "--sizes", "1,2", "--key-bits", "128", "--repetitions", "1", "--threads", "1", "--csv"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "size,setup_s,auth_s,key_bits,solver,parallelism");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("2,") && lines[2].ends_with(",128,closed-form,1"));
}
