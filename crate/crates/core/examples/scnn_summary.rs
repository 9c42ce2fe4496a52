//! Print the layer table of the full network: output sizes and parameter
//! counts under both conventions.

use scnn::scnn::{build_scnn, parameter_count};

fn main() -> scnn::Result<()> {
    let spec = build_scnn(5)?;
    let outs = spec.output_shapes()?;
    let counts = parameter_count(&spec)?;

    println!("{:<8} {:>16} {:>12} {:>12}", "layer", "output", "standard", "table");
    for (layer, (h, w, c)) in spec.layers.iter().zip(outs) {
        let row = counts.per_layer.iter().find(|l| l.name == layer.name);
        let (std, tab) = row.map_or((String::new(), String::new()), |r| (r.standard.to_string(), r.paper_style.to_string()));
        println!("{:<8} {:>16} {:>12} {:>12}", layer.name, format!("{h}x{w}x{c}"), std, tab);
    }
    println!("total: {} learnable values, {} by the table's convention", counts.standard, counts.paper_style);
    Ok(())
}
