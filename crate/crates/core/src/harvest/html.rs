//! Plain-text extraction from fetched HTML.

use scraper::{ElementRef, Html, Node, Selector};

const SKIPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "noscript", "template", "head", "svg",
    "iframe",
];

const BLOCK: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "details", "div", "dl",
    "dt", "fieldset", "figcaption", "figure", "form", "h1", "h2", "h3", "h4", "h5", "h6", "hr",
    "html", "li", "main", "ol", "p", "pre", "section", "summary", "table", "tbody", "td",
    "tfoot", "th", "thead", "tr", "ul",
];

/// Returns `(title, plain_text)` for an HTML document.
///
/// Scripts, styles, navigation, headers, footers and comments are dropped.
/// Block elements become line boundaries, entities are decoded and runs of
/// whitespace collapse to one space. The title comes from `<title>`, then
/// the first heading, else it is empty. Malformed markup is accepted.
pub fn extract_text(raw_html: &str) -> (String, String) {
    let doc = Html::parse_document(raw_html);

    let mut buf = String::new();
    walk(doc.root_element(), &mut buf);
    let plain = buf
        .split('\n')
        .map(collapse_whitespace)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");

    (find_title(&doc), plain)
}

fn walk(el: ElementRef<'_>, buf: &mut String) {
    let name = el.value().name();
    if SKIPPED.contains(&name) {
        return;
    }
    let block = BLOCK.contains(&name);
    if block {
        buf.push('\n');
    }
    for child in el.children() {
        match child.value() {
            Node::Text(text) => buf.push_str(text),
            Node::Element(_) => {
                if let Some(child_el) = ElementRef::wrap(child) {
                    walk(child_el, buf);
                }
            }
            _ => {}
        }
    }
    if block {
        buf.push('\n');
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn find_title(doc: &Html) -> String {
    let title = Selector::parse("title").expect("static selector");
    if let Some(t) = doc.select(&title).next() {
        let text = collapse_whitespace(&t.text().collect::<String>());
        if !text.is_empty() {
            return text;
        }
    }
    let heading = Selector::parse("h1, h2, h3, h4, h5, h6").expect("static selector");
    doc.select(&heading)
        .map(|h| collapse_whitespace(&h.text().collect::<String>()))
        .find(|t| !t.is_empty())
        .unwrap_or_default()
}
