use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use storycut_core::understanding::provider::{
    ChatProvider, ChatRequest, HttpChatProvider, ProviderError,
};

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serves one request with `status` and `body`, returning what it received.
fn serve_once(status: &'static str, body: &'static str) -> (String, thread::JoinHandle<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let mut headers = Vec::new();
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end().to_string();
            if line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            headers.push(line);
        }
        let mut raw = vec![0; length];
        reader.read_exact(&mut raw).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        Captured {
            request_line: request_line.trim_end().to_string(),
            headers,
            body: serde_json::from_slice(&raw).unwrap(),
        }
    });
    (url, handle)
}

#[test]
fn posts_the_request_and_reads_content() {
    let (url, server) = serve_once("200 OK", r#"{"content":"<result>[]</result>"}"#);
    let llm = HttpChatProvider::new(url, "secret-token").unwrap();
    let request = ChatRequest::user("editor-model", "score these scenes");
    assert_eq!(llm.complete(&request).unwrap(), "<result>[]</result>");
    let got = server.join().unwrap();
    assert_eq!(got.request_line, "POST /v1/chat HTTP/1.1");
    assert!(got
        .headers
        .iter()
        .any(|h| h.eq_ignore_ascii_case("authorization: Bearer secret-token")));
    assert_eq!(got.body, serde_json::to_value(&request).unwrap());
    assert_eq!(got.body["messages"][0]["content"], "score these scenes");
}

#[test]
fn error_status_is_reported() {
    let (url, server) = serve_once("503 Service Unavailable", "busy");
    let llm = HttpChatProvider::new(url, "k").unwrap();
    let err = llm.complete(&ChatRequest::user("m", "x")).unwrap_err();
    assert_eq!(
        err,
        ProviderError::Status {
            status: 503,
            body: "busy".into()
        }
    );
    server.join().unwrap();
}

#[test]
fn missing_key_is_a_credential_error() {
    let err = HttpChatProvider::from_env("http://127.0.0.1:9", "STORYCUT_TEST_UNSET_KEY")
        .err()
        .unwrap();
    assert_eq!(
        err,
        ProviderError::MissingCredential("STORYCUT_TEST_UNSET_KEY".into())
    );
}
