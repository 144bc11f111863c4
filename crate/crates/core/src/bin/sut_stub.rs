//! Minimal external SUT speaking the line protocol, for testing the harness.
//!
//! ```text
//! sut-stub [echo|malformed] [--classes K] [--fail-on ID]
//! ```
//!
//! `echo` answers classify requests with uniform probabilities over K classes
//! (default 3) and detect requests with the ten brightest pixels.
//! `malformed` behaves like `echo` except that it answers request `--fail-on`
//! (default 2) with garbage.

use std::io::{BufRead, Write};

use base64::Engine;
use serde_json::{json, Value};

fn brightest(width: usize, height: usize, rgb: &[u8]) -> Vec<Value> {
    let mut px: Vec<(u32, usize)> = (0..width * height)
        .map(|i| (rgb[3 * i] as u32 + rgb[3 * i + 1] as u32 + rgb[3 * i + 2] as u32, i))
        .collect();
    px.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    px.iter()
        .take(10)
        .map(|(v, i)| json!([i % width, i / width, *v as f64 / 765.0]))
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().cloned().unwrap_or_else(|| "echo".into());
    let flag = |name: &str, default: u64| {
        args.iter().position(|a| a == name).and_then(|i| args.get(i + 1)).and_then(|v| v.parse().ok()).unwrap_or(default)
    };
    let classes = flag("--classes", 3).max(1) as usize;
    let fail_on = flag("--fail-on", 2);
    if mode != "echo" && mode != "malformed" {
        eprintln!("sut-stub: unknown mode {mode:?}");
        std::process::exit(1);
    }

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let Ok(req) = serde_json::from_str::<Value>(&line) else {
            eprintln!("sut-stub: bad request");
            std::process::exit(2);
        };
        let id = req["id"].as_u64().unwrap_or(0);
        let reply = if mode == "malformed" && id == fail_on {
            "{not json".to_string()
        } else if req["task"] == "detect" {
            let (w, h) = (req["width"].as_u64().unwrap_or(0) as usize, req["height"].as_u64().unwrap_or(0) as usize);
            let rgb = base64::engine::general_purpose::STANDARD
                .decode(req["pixels_b64"].as_str().unwrap_or(""))
                .unwrap_or_default();
            let points = if rgb.len() == w * h * 3 { brightest(w, h, &rgb) } else { vec![] };
            json!({"id": id, "points": points}).to_string()
        } else {
            json!({"id": id, "probs": vec![1.0 / classes as f64; classes]}).to_string()
        };
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}
