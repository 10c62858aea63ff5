//! Build the listwise rerank prompt and parse model replies, including the
//! malformed ones the pipelines fall back on.

use ragkit::gateway::{build_control_prompt, build_rerank_prompt, parse_free_selection, parse_rerank_response};

fn main() -> ragkit::Result<()> {
    let candidates = [
        "Vienna is the capital of Austria.",
        "The Danube flows through Vienna.",
        "Paris is the capital of France.",
    ];
    let prompt = build_rerank_prompt("Which river flows through the Austrian capital?", 2, &candidates)?;
    println!("{prompt}\n");
    println!("{}\n", build_control_prompt("Which river flows through the Austrian capital?", &candidates)?);

    for reply in ["[2, 1]", "Sure! The answer is [2, 2, 9, 1]", "[1]", "no list here"] {
        match parse_rerank_response(reply, candidates.len(), 2) {
            Ok(sel) => println!("{reply:?} -> {:?}", sel.ids),
            Err(e) => println!("{reply:?} -> error: {e}"),
        }
    }
    println!("free selection of \"[3]\" -> {:?}", parse_free_selection("[3]", 3)?.ids);
    Ok(())
}
