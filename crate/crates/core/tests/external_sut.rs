mod common;

use std::time::Duration;

use nerfmt::image::{ImageBuffer, Provenance};
use nerfmt::suts::{run_sut, ExternalSut, Sut, SutBackend, SutDescriptor, SutError, SutOutput, SutTask};

fn external(args: &[&str], task: SutTask) -> Sut {
    let mut cmd = vec![common::stub_exe().to_string()];
    cmd.extend(args.iter().map(|s| s.to_string()));
    let ext = ExternalSut::new(cmd, Duration::from_secs(10)).unwrap();
    Sut::new(SutDescriptor { name: "stub".into(), task, max_points: 100 }, SutBackend::External(ext)).unwrap()
}

fn gradient(w: u32, h: u32) -> ImageBuffer {
    let mut img = ImageBuffer::filled(w, h, [0.0; 3], Provenance::Real);
    for y in 0..h {
        for x in 0..w {
            let v = (x + y) as f32 / (w + h) as f32;
            img.set(x, y, [v, v, v]);
        }
    }
    img
}

fn requests(sut: &Sut) -> u64 {
    match &sut.backend {
        SutBackend::External(e) => e.requests_sent(),
        _ => unreachable!(),
    }
}

#[test]
fn echo_stub_round_trips_fifty_requests() {
    let det = external(&["echo"], SutTask::Detect);
    let cls = external(&["echo", "--classes", "4"], SutTask::Classify);
    let img = gradient(32, 20);
    for _ in 0..25 {
        match run_sut(&det, &img).unwrap() {
            SutOutput::InterestPoints { points } => {
                assert_eq!(points.len(), 10);
                // brightest pixel is the bottom-right corner
                assert_eq!((points[0].x, points[0].y), (31.0, 19.0));
            }
            o => panic!("unexpected {o:?}"),
        }
        assert_eq!(run_sut(&cls, &img).unwrap(), SutOutput::Classification { probs: vec![0.25; 4] });
    }
    assert_eq!(requests(&det) + requests(&cls), 50);
}

#[test]
fn malformed_reply_fails_only_that_request() {
    let sut = external(&["malformed", "--fail-on", "2"], SutTask::Classify);
    let img = gradient(16, 16);
    let results: Vec<_> = (0..6).map(|_| run_sut(&sut, &img)).collect();
    for (i, r) in results.iter().enumerate() {
        if i == 2 {
            assert!(matches!(r, Err(SutError::SutCrashed(_))), "{r:?}");
        } else {
            assert!(r.is_ok(), "request {i}: {r:?}");
        }
    }
}

#[test]
fn missing_executable_is_a_crash_not_a_panic() {
    let ext = ExternalSut::new(vec!["/nonexistent/sut".into()], Duration::from_secs(1)).unwrap();
    let sut = Sut::new(SutDescriptor { name: "x".into(), task: SutTask::Detect, max_points: 5 }, SutBackend::External(ext))
        .unwrap();
    assert!(matches!(run_sut(&sut, &gradient(8, 8)), Err(SutError::SutCrashed(_))));
}

#[test]
fn single_class_stub_is_certain() {
    let sut = external(&["echo", "--classes", "1"], SutTask::Classify);
    assert_eq!(run_sut(&sut, &gradient(8, 8)).unwrap(), SutOutput::Classification { probs: vec![1.0] });
}
