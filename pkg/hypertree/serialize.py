"""Text format for graphs and versioned JSON for every report."""
import csv
import json

from hypertree.errors import FormatError, GraphError
from hypertree.graph import graph_from_edges

VERSION = 1


def dump_graph(g):
    """Return the text form of g."""
    lines = [
        f"graph {g.family_tag} {g.n_vertices} {g.n_edges} root={g.root} "
        f"depth={g.depth} sphere={g.sphere_radius} version={VERSION}"
    ]
    if g.layer_of is not None:
        lines.extend(f"l {v} {k}" for v, k in enumerate(g.layer_of))
    lines.extend(f"e {u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def _ints(tokens, count, line, offset):
    if len(tokens) != count:
        raise FormatError(f"expected {count} fields, found {len(tokens)}",
                          line, offset)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FormatError("expected integers", line, offset) from None


def _header(text):
    first = text.split("\n", 1)[0]
    tokens = first.split()
    if len(tokens) < 6 or tokens[0] != "graph":
        raise FormatError("missing graph header", 1, 0)
    fields = {}
    for token in tokens[4:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise FormatError(f"bad header field '{token}'", 1, 0)
        fields[key] = value
    try:
        n_vertices, n_edges = int(tokens[2]), int(tokens[3])
        values = {k: int(v) for k, v in fields.items()}
    except ValueError:
        raise FormatError("non-integer header value", 1, 0) from None
    if values.get("version", VERSION) != VERSION:
        raise FormatError(f"unsupported version {values['version']}", 1, 0)
    for key in ("root", "depth"):
        if key not in values:
            raise FormatError(f"header lacks '{key}='", 1, 0)
    return tokens[1], n_vertices, n_edges, values


def load_graph(text):
    """Parse the text form back into a TruncatedGraph."""
    tag, n_vertices, n_edges, header = _header(text)
    layers = {}
    edges = []
    offset = len(text.split("\n", 1)[0]) + 1
    lines = text.split("\n")[1:]
    for number, line in enumerate(lines, start=2):
        tokens = line.split()
        if not tokens:
            if line or number != len(lines) + 1:
                raise FormatError("blank line", number, offset)
        elif tokens[0] == "l":
            v, k = _ints(tokens[1:], 2, number, offset)
            layers[v] = k
        elif tokens[0] == "e":
            u, v = _ints(tokens[1:], 2, number, offset)
            if u >= v:
                raise FormatError("edge must be written with u < v",
                                  number, offset)
            edges.append((u, v))
        else:
            raise FormatError(f"unknown record '{tokens[0]}'", number, offset)
        offset += len(line) + 1
    if len(edges) != n_edges:
        raise FormatError(
            f"expected {n_edges} edges, found {len(edges)}",
            len(lines) + 1, len(text))
    layer_of = None
    if layers:
        if sorted(layers) != list(range(n_vertices)):
            raise FormatError("layer records do not cover every vertex",
                              len(lines) + 1, len(text))
        layer_of = [layers[v] for v in range(n_vertices)]
    try:
        g = graph_from_edges(
            n_vertices, edges, root=header["root"], family_tag=tag,
            sphere_radius=header.get("sphere"), layer_of=layer_of)
    except GraphError as e:
        raise FormatError(str(e), None, len(text)) from e
    if g.depth != header["depth"]:
        raise FormatError(
            f"header depth {header['depth']} but eccentricity {g.depth}",
            1, 0)
    return g


def dump_json(doc):
    """Return doc as versioned JSON with sorted keys and a newline."""
    return json.dumps({**doc, "version": VERSION}, sort_keys=True,
                      indent=2) + "\n"


def load_json(text):
    """Parse versioned JSON, refusing other versions."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, e.lineno, e.pos) from e
    if not isinstance(doc, dict):
        raise FormatError("expected a JSON object", 1, 0)
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported version {doc.get('version')!r}",
                          1, 0)
    return doc


def write_text(path, text):
    """Write text to path as UTF-8 with Unix newlines."""
    with path.open("w", encoding="utf-8", newline="\n") as outfile:
        outfile.write(text)


def write_csv(path, header, rows):
    """Write a CSV file with a header row."""
    with path.open("w", encoding="utf-8", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
