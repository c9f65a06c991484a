//! PAGE XML ground truth.
//!
//! Elements are matched by local name, so any `.../pagecontent/...` schema
//! version is accepted. Every element whose name ends in `Region` becomes a
//! ground-truth region; its class is the `type` attribute of a `TextRegion`
//! (e.g. `heading`, `paragraph`) or the element name otherwise. SSU labels
//! may be given as `structural_id` / `semantic_id` attributes or inside the
//! `custom` attribute (`ssu {structural_id:3; semantic_id:1;}`).

use std::path::Path;

use roxmltree::{Document, Node};

use super::{infer_canvas, read_to_string, DatasetManifest, GtFormat, GtPage};
use crate::error::{CoteError, Result};
use crate::geometry::RegionGeometry;
use crate::mask::PageCanvas;
use crate::ssu::{ClassMap, GroundTruthRegion};

#[derive(Debug, Clone, PartialEq)]
pub struct PageXmlPage {
    pub image_id: String,
    pub canvas: PageCanvas,
    pub regions: Vec<GroundTruthRegion>,
    /// False when the file had no `ReadingOrder` and document order was used.
    pub reading_order_declared: bool,
    pub canvas_inferred: bool,
    pub warnings: Vec<String>,
}

pub fn read_page_xml(path: &Path, classes: &mut ClassMap) -> Result<PageXmlPage> {
    let text = read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_page_xml(&text, path, &stem, classes)
}

/// Reads a single PAGE file or every `.xml` file in a directory, in file
/// name order.
pub fn read_page_xml_dataset(path: &Path) -> Result<DatasetManifest> {
    let files = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| CoteError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut classes = ClassMap::new();
    let mut pages = Vec::with_capacity(files.len());
    let mut warnings = Vec::new();
    for file in files {
        let page = read_page_xml(&file, &mut classes)?;
        warnings.extend(page.warnings.iter().map(|w| format!("{}: {w}", file.display())));
        pages.push(GtPage {
            image_id: page.image_id,
            canvas: page.canvas,
            regions: page.regions,
            source: Some(file),
        });
    }
    Ok(DatasetManifest {
        format: GtFormat::PageXml,
        classes,
        pages,
        warnings,
    })
}

fn describe(doc: &Document, node: Node) -> String {
    let pos = doc.text_pos_at(node.range().start);
    match node.attribute("id") {
        Some(id) => format!("<{} id={id:?}> at line {}", node.tag_name().name(), pos.row),
        None => format!("<{}> at line {}", node.tag_name().name(), pos.row),
    }
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

type ParsedRegion = (String, RegionGeometry, String, Option<i64>, Option<i64>);

pub fn parse_page_xml(text: &str, path: &Path, fallback_id: &str, classes: &mut ClassMap) -> Result<PageXmlPage> {
    let doc = Document::parse(text).map_err(|e| CoteError::parse(path, format!("malformed XML: {e}")))?;
    let root = doc.root_element();
    let ns = root.tag_name().namespace().unwrap_or("");
    if !ns.contains("pagecontent") {
        return Err(CoteError::parse(
            path,
            format!("unknown namespace {ns:?} on <{}>", root.tag_name().name()),
        ));
    }
    if root.tag_name().name() != "PcGts" {
        return Err(CoteError::parse(
            path,
            format!("expected <PcGts> root, found {}", describe(&doc, root)),
        ));
    }
    let page = child(root, "Page").ok_or_else(|| CoteError::parse(path, "missing <Page> element"))?;
    let mut warnings = Vec::new();

    let image_id = page
        .attribute("imageFilename")
        .and_then(|f| Path::new(f).file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| fallback_id.to_string());

    // (id, geometry, class name, structural id, semantic id)
    let mut parsed: Vec<ParsedRegion> = Vec::new();
    for (n, node) in page
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name().ends_with("Region"))
        .enumerate()
    {
        let id = match node.attribute("id") {
            Some(id) => id.to_string(),
            None => {
                warnings.push(format!("{} has no id; using r{n}", describe(&doc, node)));
                format!("r{n}")
            }
        };
        let coords = child(node, "Coords")
            .ok_or_else(|| CoteError::parse(path, format!("{}: missing Coords", describe(&doc, node))))?;
        let points =
            parse_coords(coords).map_err(|m| CoteError::parse(path, format!("{}: {m}", describe(&doc, coords))))?;
        let class = match (node.tag_name().name(), node.attribute("type")) {
            ("TextRegion", Some(t)) => t.to_string(),
            (name, _) => name.to_string(),
        };
        let custom = node.attribute("custom").unwrap_or("");
        let unit = |key: &str| -> Result<Option<i64>> {
            let raw = node
                .attribute(key)
                .map(str::to_string)
                .or_else(|| custom_value(custom, key));
            raw.map(|v| {
                v.trim().parse().map_err(|_| {
                    CoteError::parse(path, format!("{}: {key} {v:?} is not an integer", describe(&doc, node)))
                })
            })
            .transpose()
        };
        let structural = unit("structural_id")?;
        let semantic = unit("semantic_id")?;
        parsed.push((id, RegionGeometry::Polygon { points }, class, structural, semantic));
    }

    let order = child(page, "ReadingOrder").map(|ro| {
        let mut refs = Vec::new();
        collect_refs(ro, &mut refs);
        refs
    });
    let reading_order_declared = order.is_some();
    let mut rank: Vec<Option<usize>> = vec![None; parsed.len()];
    match &order {
        Some(refs) => {
            let mut next = 0;
            for r in refs {
                if let Some(i) = parsed.iter().position(|p| &p.0 == r) {
                    if rank[i].is_none() {
                        rank[i] = Some(next);
                        next += 1;
                    }
                } else {
                    warnings.push(format!("reading order references unknown region {r:?}"));
                }
            }
            for (i, slot) in rank.iter_mut().enumerate() {
                if slot.is_none() {
                    warnings.push(format!(
                        "region {:?} missing from reading order; appended in document order",
                        parsed[i].0
                    ));
                    *slot = Some(next);
                    next += 1;
                }
            }
        }
        None => {
            warnings.push("no ReadingOrder; document order used".to_string());
            for (i, slot) in rank.iter_mut().enumerate() {
                *slot = Some(i);
            }
        }
    }

    let mut regions: Vec<GroundTruthRegion> = parsed
        .into_iter()
        .zip(rank)
        .map(
            |((id, geometry, class, structural_id, semantic_id), rank)| GroundTruthRegion {
                id,
                geometry,
                class_id: classes.intern(&class),
                structural_id,
                semantic_id,
                reading_order: rank.expect("every region ranked") as u32,
            },
        )
        .collect();
    regions.sort_by_key(|r| r.reading_order);

    let dims = (
        page.attribute("imageWidth").and_then(|v| v.trim().parse::<u32>().ok()),
        page.attribute("imageHeight").and_then(|v| v.trim().parse::<u32>().ok()),
    );
    let (canvas, canvas_inferred) = match dims {
        (Some(w), Some(h)) if w > 0 && h > 0 => (PageCanvas::new(w, h)?, false),
        _ => {
            warnings.push("page size missing; inferred from region extent".to_string());
            (infer_canvas(regions.iter().map(|r| &r.geometry))?, true)
        }
    };

    Ok(PageXmlPage {
        image_id,
        canvas,
        regions,
        reading_order_declared,
        canvas_inferred,
        warnings,
    })
}

/// Region references in reading order. Children of a group are visited in
/// `index` order when present, document order otherwise.
fn collect_refs(node: Node, out: &mut Vec<String>) {
    let mut children: Vec<Node> = node.children().filter(Node::is_element).collect();
    children.sort_by_key(|c| {
        c.attribute("index")
            .and_then(|i| i.parse::<i64>().ok())
            .unwrap_or(i64::MAX)
    });
    for c in children {
        if let Some(r) = c.attribute("regionRef") {
            out.push(r.to_string());
        }
        if c.tag_name().name().contains("Group") {
            collect_refs(c, out);
        }
    }
}

fn parse_coords(coords: Node) -> std::result::Result<Vec<[f64; 2]>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad coordinate {s:?}"));
    let points: Vec<[f64; 2]> = match coords.attribute("points") {
        Some(attr) => attr
            .split_whitespace()
            .map(|pair| {
                let (x, y) = pair.split_once(',').ok_or_else(|| format!("bad point {pair:?}"))?;
                Ok([num(x)?, num(y)?])
            })
            .collect::<std::result::Result<_, String>>()?,
        None => coords
            .children()
            .filter(|c| c.is_element() && c.tag_name().name() == "Point")
            .map(|p| {
                let x = p.attribute("x").ok_or("Point without x")?;
                let y = p.attribute("y").ok_or("Point without y")?;
                Ok([num(x)?, num(y)?])
            })
            .collect::<std::result::Result<_, String>>()?,
    };
    if points.len() < 3 {
        return Err(format!("polygon needs at least 3 points, found {}", points.len()));
    }
    Ok(points)
}

/// Extracts `key:value` from a PAGE `custom` attribute.
fn custom_value(custom: &str, key: &str) -> Option<String> {
    let start = custom.find(&format!("{key}:"))? + key.len() + 1;
    let rest = &custom[start..];
    let end = rest.find([';', '}']).unwrap_or(rest.len());
    Some(rest[..end].trim().to_string())
}
