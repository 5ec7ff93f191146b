//! The online client against a throwaway local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use metasel_extract::{AttributeProvider, CachedProvider, Error, GpsFix, OverpassConfig, OverpassProvider, WayClass};

const BODY: &str = r#"{"version":0.6,"elements":[{"type":"way","id":7,"tags":{"highway":"primary","lanes":"2","bridge":"yes"},"geometry":[{"lat":51.5,"lon":-0.13},{"lat":51.5,"lon":-0.12}]}]}"#;

/// Serves canned responses; `statuses` are used in order, the last one
/// repeating. Returns the endpoint URL and a request counter.
fn serve(statuses: Vec<u16>, body: &'static str) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api/interpreter", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let seen = count.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            assert!(request_line.starts_with("POST"));
            assert!(String::from_utf8(payload).unwrap().starts_with("data="));
            let n = seen.fetch_add(1, Ordering::SeqCst);
            let status = *statuses.get(n).unwrap_or(statuses.last().unwrap());
            let text = if status == 200 { body } else { "busy" };
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, count)
}

fn config(endpoint: String) -> OverpassConfig {
    OverpassConfig {
        endpoint,
        requests_per_second: 200.0,
        max_retries: 3,
        backoff_initial_ms: 5,
        timeout_ms: 5_000,
        ..OverpassConfig::default()
    }
}

fn fix() -> GpsFix {
    GpsFix::new(51.50003, -0.125, 0.0).unwrap()
}

#[test]
fn parses_a_successful_answer() {
    let (url, count) = serve(vec![200], BODY);
    let p = OverpassProvider::new(config(url)).unwrap();
    let a = p.lookup(&fix(), 15.0).unwrap();
    assert_eq!(a.way_class, WayClass::Primary);
    assert_eq!(a.lanes, Some(2));
    assert!(a.bridge);
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn retries_through_throttling() {
    let (url, count) = serve(vec![429, 503, 200], BODY);
    let p = OverpassProvider::new(config(url)).unwrap();
    let started = Instant::now();
    assert_eq!(p.lookup(&fix(), 15.0).unwrap().way_class, WayClass::Primary);
    assert_eq!(count.load(Ordering::SeqCst), 3);
    // backoff of 5 ms then 10 ms
    assert!(started.elapsed().as_millis() >= 15);
}

#[test]
fn gives_up_after_retries() {
    let (url, count) = serve(vec![500], BODY);
    let p = OverpassProvider::new(config(url)).unwrap();
    assert!(matches!(p.lookup(&fix(), 15.0), Err(Error::ProviderUnavailable(_))));
    assert_eq!(count.load(Ordering::SeqCst), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, count) = serve(vec![400], BODY);
    let p = OverpassProvider::new(config(url)).unwrap();
    assert!(matches!(p.lookup(&fix(), 15.0), Err(Error::ProviderUnavailable(_))));
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn garbage_body_is_a_parse_error() {
    let (url, _) = serve(vec![200], "<html>maintenance</html>");
    let p = OverpassProvider::new(config(url)).unwrap();
    assert!(matches!(p.lookup(&fix(), 15.0), Err(Error::Response(_))));
}

#[test]
fn unreachable_endpoint() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = config(format!("http://127.0.0.1:{port}/"));
    cfg.max_retries = 1;
    let p = OverpassProvider::new(cfg).unwrap();
    assert!(matches!(p.lookup(&fix(), 15.0), Err(Error::ProviderUnavailable(_))));
}

#[test]
fn rate_gate_spaces_requests() {
    let (url, count) = serve(vec![200], BODY);
    let mut cfg = config(url);
    cfg.requests_per_second = 20.0;
    let p = OverpassProvider::new(cfg).unwrap();
    let started = Instant::now();
    for i in 0..4 {
        p.lookup(&GpsFix::new(51.5, -0.125 + 1e-4 * i as f64, 0.0).unwrap(), 15.0).unwrap();
    }
    assert_eq!(count.load(Ordering::SeqCst), 4);
    // three gaps of 50 ms
    assert!(started.elapsed().as_millis() >= 150);
}

#[test]
fn cache_in_front_of_the_client() {
    let (url, count) = serve(vec![200], BODY);
    let p = CachedProvider::new(OverpassProvider::new(config(url)).unwrap());
    let a = p.lookup(&fix(), 15.0).unwrap();
    let b = p.lookup(&GpsFix { t: 5.0, ..fix() }, 15.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(count.load(Ordering::SeqCst), 1);
}
