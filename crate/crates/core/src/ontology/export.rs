use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::graph::{GraphEdge, OntologyGraph};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c if (c as u32) < 0x20 => {}
            c => out.push(c),
        }
    }
    out
}

/// GEXF 1.3 document for a directed multigraph.
pub fn gexf_string(graph: &OntologyGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n");
    s.push_str("  <graph mode=\"static\" defaultedgetype=\"directed\">\n");
    s.push_str("    <attributes class=\"node\">\n");
    s.push_str("      <attribute id=\"degree\" title=\"degree\" type=\"integer\"/>\n");
    s.push_str("      <attribute id=\"community_id\" title=\"community_id\" type=\"integer\"/>\n");
    s.push_str("      <attribute id=\"merged_labels\" title=\"merged_labels\" type=\"string\"/>\n");
    s.push_str("    </attributes>\n");
    s.push_str("    <attributes class=\"edge\">\n");
    s.push_str("      <attribute id=\"article_id\" title=\"article_id\" type=\"string\"/>\n");
    s.push_str("      <attribute id=\"newspaper_id\" title=\"newspaper_id\" type=\"string\"/>\n");
    s.push_str("    </attributes>\n");
    s.push_str("    <nodes>\n");
    for n in &graph.nodes {
        let merged = serde_json::to_string(&n.merged_labels).expect("strings serialize");
        let _ = writeln!(s, "      <node id=\"{}\" label=\"{}\">", n.node_id, escape(&n.label));
        s.push_str("        <attvalues>\n");
        let _ = writeln!(s, "          <attvalue for=\"degree\" value=\"{}\"/>", n.degree);
        let _ = writeln!(s, "          <attvalue for=\"community_id\" value=\"{}\"/>", n.community_id);
        let _ = writeln!(s, "          <attvalue for=\"merged_labels\" value=\"{}\"/>", escape(&merged));
        s.push_str("        </attvalues>\n");
        s.push_str("      </node>\n");
    }
    s.push_str("    </nodes>\n");
    s.push_str("    <edges>\n");
    for (i, e) in graph.edges.iter().enumerate() {
        let _ = writeln!(
            s,
            "      <edge id=\"{i}\" source=\"{}\" target=\"{}\" label=\"{}\">",
            e.from_node,
            e.to_node,
            escape(&e.label)
        );
        s.push_str("        <attvalues>\n");
        let _ = writeln!(s, "          <attvalue for=\"article_id\" value=\"{}\"/>", escape(&e.article_id));
        let _ = writeln!(s, "          <attvalue for=\"newspaper_id\" value=\"{}\"/>", escape(&e.newspaper_id));
        s.push_str("        </attvalues>\n");
        s.push_str("      </edge>\n");
    }
    s.push_str("    </edges>\n");
    s.push_str("  </graph>\n");
    s.push_str("</gexf>\n");
    s
}

pub fn write_gexf<W: Write>(graph: &OntologyGraph, mut out: W) -> Result<(), ExportError> {
    out.write_all(gexf_string(graph).as_bytes())?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    label: String,
    from_node: usize,
    to_node: usize,
    from_label: String,
    to_label: String,
    article_id: String,
    newspaper_id: String,
}

/// One row per edge; endpoint labels are included for readability.
pub fn write_edge_csv<W: Write>(graph: &OntologyGraph, out: W) -> Result<(), ExportError> {
    let label_of = |id: usize| graph.node(id).map(|n| n.label.clone()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    for e in &graph.edges {
        w.serialize(EdgeRow {
            label: e.label.clone(),
            from_node: e.from_node,
            to_node: e.to_node,
            from_label: label_of(e.from_node),
            to_label: label_of(e.to_node),
            article_id: e.article_id.clone(),
            newspaper_id: e.newspaper_id.clone(),
        })?;
    }
    if graph.edges.is_empty() {
        w.write_record(["label", "from_node", "to_node", "from_label", "to_label", "article_id", "newspaper_id"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_csv<R: Read>(input: R) -> Result<Vec<GraphEdge>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let mut edges = Vec::new();
    for row in r.deserialize::<EdgeRow>() {
        let row = row?;
        edges.push(GraphEdge {
            label: row.label,
            from_node: row.from_node,
            to_node: row.to_node,
            article_id: row.article_id,
            newspaper_id: row.newspaper_id,
        });
    }
    Ok(edges)
}
