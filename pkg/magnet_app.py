"""
Run viewer for magnet output directories
Run with: streamlit run magnet_app.py
"""
import json
import os

import networkx as nx
import pandas as pd
import streamlit as st

import config

RUN_FILES = {
    "report": "report.json",
    "edges": "edges.csv",
    "path": "path.csv",
    "components": "components.json",
    "stability": "stability.json",
    "stable_edges": "stable_edges.csv",
    "interpretations": "interpretations.csv",
    "node_classes": "node_classes.csv",
    "diagnostics": "diagnostics.json",
    "truth_edges": "truth_edges.csv",
}


def load_run_dir(path):
    """Every known artifact in a run directory, keyed by kind; missing files are skipped"""
    if not os.path.isdir(path):
        return {}
    run = {}
    for kind, name in RUN_FILES.items():
        full = os.path.join(path, name)
        if not os.path.isfile(full):
            continue
        if name.endswith(".json"):
            with open(full, "r", encoding="utf-8") as f:
                run[kind] = json.load(f)
        else:
            run[kind] = pd.read_csv(full)
    return run


def edge_graph(edges):
    graph = nx.Graph()
    graph.add_edges_from(zip(edges["node_a"].astype(int), edges["node_b"].astype(int)))
    return graph


# ============================================
# MAIN APP
# ============================================

def main():
    st.set_page_config(page_title="magnet run viewer", page_icon="🧲", layout="wide")

    if "run_dir" not in st.session_state:
        st.session_state.run_dir = "."

    @st.cache_data
    def cached_run(path, stamp):
        return load_run_dir(path)

    st.title("🧲 magnet run viewer")
    st.markdown("Browse the estimate, path, stability and interpretation output of a run.")

    with st.sidebar:
        st.header("📁 Run directory")
        st.session_state.run_dir = st.text_input("Path", st.session_state.run_dir)
        if st.button("🔄 Reload"):
            st.cache_data.clear()
        st.divider()
        st.markdown(f"magnet {config.__version__}, format schema {config.FORMAT_SCHEMA_VERSION}")

    path = st.session_state.run_dir
    stamp = os.path.getmtime(path) if os.path.isdir(path) else 0
    run = cached_run(path, stamp)
    if not run:
        st.info("👈 Point the sidebar at a directory written by `magnet`")
        return

    if "report" in run:
        report = run["report"]
        st.subheader("📊 Fit")
        cols = st.columns(4)
        cols[0].metric("lambda", f"{report['lambda']:.4g}")
        cols[1].metric("edges", report["edge_count"])
        cols[2].metric("sweeps", report["sweeps"])
        cols[3].metric("converged", "✅" if report["converged"] else "⚠️")
        if report.get("objective_trace"):
            st.line_chart(pd.DataFrame({"objective": report["objective_trace"]}))
        with st.expander("⚙️ Resolved configuration"):
            st.json(report.get("config") or {})

    if "edges" in run:
        st.subheader("🔗 Edges")
        st.dataframe(run["edges"], use_container_width=True)
        graph = edge_graph(run["edges"])
        if "truth_edges" in run:
            truth = edge_graph(run["truth_edges"])
            wrong = {tuple(sorted(e)) for e in graph.edges()} ^ {tuple(sorted(e)) for e in truth.edges()}
            st.metric("Hamming distance to truth", len(wrong))

    if "path" in run:
        st.subheader("📈 Regularization path")
        st.line_chart(run["path"].set_index("lambda")[["bic"]])
        st.dataframe(run["path"], use_container_width=True)

    if "components" in run:
        with st.expander("🧩 Screening components"):
            for i, members in enumerate(run["components"]["components"]):
                st.markdown(f"**Component {i}:** {members}")

    if "stability" in run:
        st.subheader("🎲 Stability selection")
        stab = run["stability"]
        st.markdown(f"{len(stab['stable_edges'])} edges selected in at least "
                    f"{stab['threshold']} of {stab['reps']} subsamples "
                    f"({stab['failed']} failed)")
        if "stable_edges" in run:
            st.dataframe(run["stable_edges"], use_container_width=True)

    if "interpretations" in run:
        st.subheader("🔍 Edge interpretation")
        st.dataframe(run["interpretations"], use_container_width=True)
        if "node_classes" in run:
            st.bar_chart(run["node_classes"].set_index("node")[["p1", "p2", "p3"]])

    if "diagnostics" in run:
        with st.expander("📐 Theory diagnostics"):
            st.json(run["diagnostics"])

    st.divider()
    st.markdown("""
    <div style='text-align: center; color: gray; font-size: 14px;'>
        Built with NumPy, SciPy, NetworkX and Streamlit | magnet
    </div>
    """, unsafe_allow_html=True)


if __name__ == "__main__":
    main()
