mod common;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use isenet::wfdb::{FetchConfig, Fetcher, WfdbError};

/// Serves fixed bodies by path; anything else is a 404.
struct Server {
    base_url: String,
    hits: Arc<AtomicUsize>,
}

fn serve(files: HashMap<String, Vec<u8>>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base_url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            if reader.read_line(&mut request).is_err() {
                continue;
            }
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let path = request.split_whitespace().nth(1).unwrap_or("/").to_string();
            let (status, body) = match files.get(&path) {
                Some(b) => ("200 OK", b.clone()),
                None => ("404 Not Found", b"missing".to_vec()),
            };
            let head = format!("HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len());
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&body);
        }
    });
    Server { base_url, hits }
}

fn files_for(r: &common::SynthRecord) -> HashMap<String, Vec<u8>> {
    HashMap::from([
        (format!("/{}.hea", r.id), r.hea.clone().into_bytes()),
        (format!("/{}.dat", r.id), r.dat.clone()),
        (format!("/{}.atr", r.id), r.atr.clone()),
    ])
}

fn fetcher(server: &Server, cache: &std::path::Path) -> Fetcher {
    Fetcher::new(FetchConfig {
        base_url: server.base_url.clone(),
        cache_dir: cache.to_path_buf(),
        timeout_secs: 10,
    })
    .unwrap()
}

#[test]
fn downloads_once_then_serves_from_cache() {
    let r = common::synth_record("100", 3600, 0);
    let server = serve(files_for(&r));
    let cache = tempfile::tempdir().unwrap();
    let f = fetcher(&server, cache.path());

    let first = f.fetch_record("100").unwrap();
    assert!(first.downloaded);
    assert_eq!(std::fs::read(&first.dat).unwrap(), r.dat);
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);

    let second = f.fetch_record("100").unwrap();
    assert!(!second.downloaded);
    assert_eq!(second.sha256, first.sha256);
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn tampered_cache_is_refetched() {
    let r = common::synth_record("101", 3600, 0);
    let server = serve(files_for(&r));
    let cache = tempfile::tempdir().unwrap();
    let f = fetcher(&server, cache.path());
    let got = f.fetch_record("101").unwrap();
    std::fs::write(&got.atr, [0u8, 0]).unwrap();
    assert!(f.fetch_record("101").unwrap().downloaded);
    assert_eq!(std::fs::read(&got.atr).unwrap(), r.atr);
}

#[test]
fn missing_record_is_not_found() {
    let server = serve(HashMap::new());
    let cache = tempfile::tempdir().unwrap();
    let err = fetcher(&server, cache.path()).fetch_record("999").unwrap_err();
    assert!(matches!(err, WfdbError::NotFound { .. }), "{err}");
    assert!(std::fs::read_dir(cache.path()).map(|d| d.count()).unwrap_or(0) == 0);
}

#[test]
fn truncated_signal_is_rejected_and_not_cached() {
    let r = common::synth_record("103", 3600, 0);
    let mut files = files_for(&r);
    files.get_mut("/103.dat").unwrap().truncate(300);
    let server = serve(files);
    let cache = tempfile::tempdir().unwrap();
    let err = fetcher(&server, cache.path()).fetch_record("103").unwrap_err();
    assert!(matches!(err, WfdbError::Integrity(_) | WfdbError::Format(_)), "{err}");
    assert!(!cache.path().join("103.dat").exists());
}

#[test]
fn concurrent_fetches_of_one_record_download_once() {
    let r = common::synth_record("105", 3600, 0);
    let server = serve(files_for(&r));
    let cache = tempfile::tempdir().unwrap();
    let f = Arc::new(fetcher(&server, cache.path()));
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let f = f.clone();
            thread::spawn(move || f.fetch_record("105").unwrap().downloaded)
        })
        .collect();
    let downloads: usize = handles.into_iter().map(|h| usize::from(h.join().unwrap())).sum();
    assert_eq!(downloads, 1);
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}
