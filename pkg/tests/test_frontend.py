import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imagecl.corpus import KERNELS, source
from imagecl.errors import KernelTypeError, LexError, ParseError, RestrictionError
from imagecl.frontend import compile_source, parse, pretty, tokenize, typecheck
from imagecl.frontend.nodes import Assign, Binary, Decl, For, GridPragma, walk

from kernelgen import random_kernel

BLUR = source("blur")


def test_tokenize_listing_statement():
    toks = tokenize("out[idx][idy] = sum/9.0;")
    assert [(t.kind, t.text) for t in toks] == [
        ("ident", "out"), ("punct", "["), ("ident", "idx"), ("punct", "]"),
        ("punct", "["), ("ident", "idy"), ("punct", "]"), ("punct", "="),
        ("ident", "sum"), ("punct", "/"), ("float", "9.0"), ("punct", ";"),
    ]
    assert (toks[0].line, toks[0].col) == (1, 1)
    assert toks[-1].col == 24


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_illegal_character():
    with pytest.raises(LexError) as ei:
        tokenize("@")
    assert (ei.value.line, ei.value.col) == (1, 1)


def test_tokenize_unterminated_comment():
    with pytest.raises(LexError):
        tokenize("int a; /* never closed")


def test_pragma_token():
    toks = tokenize("#pragma imcl grid(in)\nint a;")
    assert toks[0].kind == "pragma"
    assert toks[1].line == 2


def test_parse_listing():
    ast = compile_source(BLUR)
    assert ast.name == "blur"
    assert [(p.name, p.kind, p.type) for p in ast.params] == [
        ("in", "image", "float"), ("out", "image", "float"),
    ]
    assert ast.pragmas == (GridPragma(target="in"),)


def test_parse_rejects_second_function():
    src = BLUR + "\nvoid other(Image<float> a){ a[idx][idy] = 1.0; }\n"
    with pytest.raises(RestrictionError):
        parse(tokenize(src))


def test_parse_rejects_while():
    src = "#pragma imcl grid(a)\nvoid k(Image<float> a){ while (1) { } }"
    with pytest.raises(RestrictionError):
        parse(tokenize(src))


def test_grid_pragma_unknown_parameter():
    src = BLUR.replace("grid(in)", "grid(bogus)")
    with pytest.raises(ParseError, match="bogus"):
        parse(tokenize(src))


def test_unknown_pragma_kind_is_error():
    src = "#pragma imcl vectorize(in)\n" + BLUR
    with pytest.raises(ParseError):
        parse(tokenize(src))


def test_literal_grid_and_boundary_pragmas():
    src = (
        "#pragma imcl grid(512, 256)\n#pragma imcl boundary(a, constant(3))\n"
        "void k(Image<float> a, Image<float> b){ b[idx][idy] = a[idx][idy]; }"
    )
    ast = compile_source(src)
    assert ast.pragmas[0].size == (512, 256)
    assert ast.boundary("a").mode == "constant" and ast.boundary("a").value == 3
    assert ast.boundary("b").mode == "constant" and ast.boundary("b").value == 0


def test_parse_error_has_position_and_expected():
    with pytest.raises(ParseError) as ei:
        compile_source("#pragma imcl grid(a)\nvoid k(Image<float> a){ a[idx][idy] = ; }")
    assert ei.value.line == 2


def test_typecheck_listing_read_is_float():
    ast = compile_source(BLUR)
    adds = [n for n in walk(ast.body) if isinstance(n, Assign) and n.op == "+="]
    assert len(adds) == 1
    assert adds[0].value.ty == "float"


def test_typecheck_rejects_indexing_builtin():
    src = "#pragma imcl grid(a)\nvoid k(Image<float> a){ a[idx][idy] = idx[3]; }"
    with pytest.raises(KernelTypeError):
        compile_source(src)


def test_typecheck_uchar_plus_int_promotes_to_int():
    src = (
        "#pragma imcl grid(a)\nvoid k(Image<uchar> a, Image<int> b){ int n = 2;"
        " b[idx][idy] = a[idx][idy] + n; }"
    )
    ast = compile_source(src)
    sums = [n for n in walk(ast.body) if isinstance(n, Binary) and n.op == "+"]
    assert sums[0].ty == "int"


def test_typecheck_rejects_undeclared():
    with pytest.raises(KernelTypeError):
        compile_source("#pragma imcl grid(a)\nvoid k(Image<float> a){ a[idx][idy] = q; }")


def test_typecheck_rejects_float_loop_bound():
    src = "#pragma imcl grid(a)\nvoid k(Image<float> a){ for (int i = 0; i < 2.5; i++) { } }"
    with pytest.raises(KernelTypeError):
        compile_source(src)


def test_diagnostic_format():
    try:
        tokenize("\n  @")
    except LexError as e:
        assert e.diagnostic("k.imcl") == "k.imcl:2:3: error: " + e.message


def test_loops_get_ids_in_order():
    ast = compile_source(BLUR)
    loops = [n for n in walk(ast.body) if isinstance(n, For)]
    assert [lp.loop_id for lp in loops] == ["L1", "L2"]


@pytest.mark.parametrize("name", KERNELS)
def test_corpus_round_trip(name):
    ast = compile_source(source(name))
    again = compile_source(pretty(ast))
    assert again == ast
    assert pretty(again) == pretty(ast)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_generated_kernels_round_trip(seed):
    ast = compile_source(random_kernel(seed))
    assert compile_source(pretty(ast)) == ast


def test_parse_is_deterministic():
    a = compile_source(source("harris"))
    b = compile_source(source("harris"))
    assert a == b and pretty(a) == pretty(b)


def test_decls_keep_spans():
    ast = compile_source(BLUR)
    decl = next(n for n in walk(ast.body) if isinstance(n, Decl))
    assert decl.span is not None and decl.span.line == 3
    assert typecheck(ast) == ast
