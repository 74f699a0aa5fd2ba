#![allow(dead_code)]

use std::path::Path;

use serde_json::json;

pub const ARTICLES: [(&str, &str, &str); 5] = [
    ("L1", "Kết hôn", "nam từ đủ 20 tuổi nữ từ đủ 18 tuổi được kết hôn"),
    ("L2", "Ly hôn", "vợ chồng thuận tình ly hôn nộp đơn tại tòa án nhân dân"),
    ("L3", "Hợp đồng lao động", "người lao động được đơn phương chấm dứt hợp đồng lao động"),
    ("L4", "Thuế", "cá nhân có thu nhập chịu thuế phải kê khai nộp thuế"),
    ("L5", "Đất đai", "người sử dụng đất được cấp giấy chứng nhận quyền sử dụng đất"),
];

/// Writes the first `n` fixture articles as JSONL.
pub fn write_articles(path: &Path, n: usize) {
    let lines: Vec<String> = ARTICLES
        .iter()
        .chain([("L6", "Thừa kế", "di sản được chia theo di chúc hoặc theo pháp luật")].iter())
        .take(n)
        .map(|(id, title, body)| json!({"id": id, "title": title, "body": body}).to_string())
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

/// Config pointing at `corpus`, `lexical` and `dense` under `dir`, with
/// `extra` appended verbatim.
pub fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("service.toml");
    let body = format!(
        "listen = \"127.0.0.1:0\"\n{extra}\n[paths]\ncorpus = \"corpus\"\nlexical = \"lexical\"\ndense = \"dense\"\n"
    );
    std::fs::write(&path, body).unwrap();
    path
}
