"""Regenerates the labeled mini corpus.

Each subject is one export. Source and sink lines are tagged with
/*SRC*/ and /*SNK*/ markers that are stripped after their line numbers are
recorded in planted.json. The mock script answers the final turn of each
subject's conversation.
"""

import json
import pathlib
import re

HERE = pathlib.Path(__file__).resolve().parent
KEYWORDS = {"if", "while", "for", "return", "sizeof", "switch", "do", "else"}

SUBJECTS = []


def subject(sid, cwe, vulnerable, funcs, imports, planted, verdict, note):
    SUBJECTS.append(dict(id=sid, cwe=cwe, vulnerable=vulnerable, funcs=funcs,
                         imports=imports, planted=planted, verdict=verdict, note=note))


def fn(fid, params, body):
    return (fid, params, body.strip("\n"))


CWE_TEXT = {
    "CWE-78": "an OS command injection vulnerability (CWE-78): tainted data reaches the command interpreter unchecked.",
    "CWE-134": "an uncontrolled format string vulnerability (CWE-134): tainted data is used as the format argument.",
    "CWE-120": "a classic buffer overflow (CWE-120): tainted data controls a copy into a fixed-size buffer.",
    "CWE-190": "an integer overflow or wraparound (CWE-190): arithmetic on the tainted value is unchecked.",
}


def yes(cwe):
    return "Yes, the code contains " + CWE_TEXT[cwe]


NO = "The code does not contain a vulnerability: the tainted value is validated before use."

# --------------------------------------------------------------------------- CWE-78

subject("s01_cmd_direct", "CWE-78", True, [fn("s01_main", [], r'''
int s01_main(void)
{
  char buf [128];

  memset(buf,0,0x80);
  fgets(buf,0x80,stdin); /*SRC*/
  system(buf); /*SNK*/
  return 0;
}
''')], ["memset", "fgets", "system"], [["s01_main"]], yes("CWE-78"), "single function, direct flow")

subject("s02_cmd_alias", "CWE-78", True, [fn("s02_serve", [("int", "sock")], r'''
void s02_serve(int sock)
{
  char buf [256];
  char *p;
  ssize_t n;

  n = recv(sock,buf,0xff,0); /*SRC*/
  if (0 < n) {
    buf[n] = '\0';
    p = buf;
    system(p); /*SNK*/
  }
  return;
}
'''), fn("s02_broken", [], r'''
void s02_broken(void)
{
  if (x) {
    puts("truncated decompilation");
''')], ["recv", "system", "puts"], [["s02_serve"]], yes("CWE-78"), "pointer alias of the receive buffer; one unparseable function")

subject("s03_cmd_getenv", "CWE-78", True, [fn("s03_main", [], r'''
int s03_main(void)
{
  char *data;

  data = getenv("ADMIN_CMD"); /*SRC*/
  if (data != (char *)0x0) {
    s03_run(data);
  }
  return 0;
}
'''), fn("s03_run", [("char *", "param_1")], r'''
void s03_run(char *param_1)
{
  FILE *fp;

  fp = popen(param_1,"r"); /*SNK*/
  if (fp != (FILE *)0x0) {
    pclose(fp);
  }
  return;
}
''')], ["getenv", "popen", "pclose"], [["s03_main", "s03_run"]], yes("CWE-78"), "return-value source, two-function chain")

subject("s04_cmd_snprintf", "CWE-78", True, [fn("s04_main", [], r'''
int s04_main(void)
{
  char input [64];
  char cmd [256];
  size_t len;

  fgets(input,0x40,stdin); /*SRC*/
  len = strlen(input);
  if ((len != 0) && (input[len - 1] == '\n')) {
    input[len - 1] = '\0';
  }
  snprintf(cmd,0x100,"ls -l %s",input);
  system(cmd); /*SNK*/
  return 0;
}
''')], ["fgets", "strlen", "snprintf", "system"], [["s04_main"]], yes("CWE-78"), "out-parameter effect of snprintf")

subject("s05_cmd_execl_chain", "CWE-78", True, [fn("s05_entry", [("int", "sock")], r'''
void s05_entry(int sock)
{
  char msg [128];

  recv(sock,msg,0x80,0); /*SRC*/
  s05_dispatch(sock,msg);
  return;
}
'''), fn("s05_dispatch", [("int", "fd"), ("char *", "req")], r'''
void s05_dispatch(int fd,char *req)
{
  char *arg;

  if (*req == '!') {
    arg = req + 1;
    s05_exec(arg);
  }
  return;
}
'''), fn("s05_exec", [("char *", "command")], r'''
void s05_exec(char *command)
{
  int pid;

  pid = fork();
  if (pid == 0) {
    execl("/bin/sh","sh","-c",command,(char *)0x0); /*SNK*/
  }
  return;
}
''')], ["recv", "fork", "execl"], [["s05_entry", "s05_dispatch", "s05_exec"]], yes("CWE-78"),
        "three-function chain, pointer arithmetic")

subject("s06_cmd_ghidra_loop", "CWE-78", True, [fn("FUN_00101a40", [("undefined4", "param_1")], r'''
undefined8 FUN_00101a40(undefined4 param_1)
{
  int iVar1;
  long lVar2;
  char local_98 [128];
  char acStack_58 [64];
  undefined8 local_88;
  code *pcVar3;

  iVar1 = recv(param_1,local_98,0x80,0); /*SRC*/
  local_88._0_2_ = 0x2f;
  for (lVar2 = 0; lVar2 < iVar1; lVar2 = lVar2 + 1) {
    acStack_58[lVar2] = local_98[lVar2];
  }
  pcVar3 = (code *)DAT_00104010;
  (*pcVar3)(acStack_58);
  system(acStack_58); /*SNK*/
  return 0;
}
''')], ["recv", "system"], [["FUN_00101a40"]], yes("CWE-78"), "decompiler naming, copy loop, indirect call")

# --------------------------------------------------------------------------- CWE-134

subject("s07_fmt_direct", "CWE-134", True, [fn("s07_main", [], r'''
int s07_main(void)
{
  char line [100];

  if (fgets(line,100,stdin) != (char *)0x0) { /*SRC*/
    printf(line); /*SNK*/
  }
  return 0;
}
''')], ["fgets", "printf"], [["s07_main"]], yes("CWE-134"), "source call inside a condition")

subject("s08_fmt_fprintf_chain", "CWE-134", True, [fn("s08_loop", [("int", "s")], r'''
void s08_loop(int s)
{
  char msg [512];
  socklen_t alen;
  struct sockaddr_in peer;

  alen = 0x10;
  while( true ) {
    recvfrom(s,msg,0x1ff,0,(struct sockaddr *)&peer,&alen); /*SRC*/
    s08_log(msg);
  }
}
'''), fn("s08_log", [("char *", "text")], r'''
void s08_log(char *text)
{
  fprintf(stderr,text); /*SNK*/
  fputc(10,stderr);
  return;
}
''')], ["recvfrom", "fprintf", "fputc"], [["s08_loop", "s08_log"]], yes("CWE-134"), "endless receive loop")

subject("s09_fmt_syslog_field", "CWE-134", True, [fn("s09_main", [], r'''
int s09_main(void)
{
  struct user_ctx ctx;

  ctx.level = 3;
  fgets(ctx.name,0x40,stdin); /*SRC*/
  syslog(ctx.level,ctx.name); /*SNK*/
  return 0;
}
''')], ["fgets", "syslog"], [["s09_main"]], yes("CWE-134"), "struct field, field-insensitive")

subject("s10_fmt_snprintf_hop", "CWE-134", True, [fn("s10_read", [], r'''
void s10_read(void)
{
  char a [100];
  char b [100];

  fgets(a,100,stdin); /*SRC*/
  snprintf(b,100,"%s",a);
  s10_show(b);
  return;
}
'''), fn("s10_show", [("char *", "banner")], r'''
void s10_show(char *banner)
{
  printf(banner); /*SNK*/
  return;
}
''')], ["fgets", "snprintf", "printf"], [["s10_read", "s10_show"]],
        "Yes, the code contains " + CWE_TEXT["CWE-120"], "answered with the wrong CWE (counts FN)")

subject("s11_fmt_switch", "CWE-134", True, [fn("s11_main", [], r'''
int s11_main(void)
{
  int choice;
  char buf [64];

  scanf("%d %63s",&choice,buf); /*SRC*/
  switch(choice) {
  case 1:
    printf(buf); /*SNK*/
    break;
  default:
    puts("unknown");
  }
  return 0;
}
''')], ["scanf", "printf", "puts"], [["s11_main"]], yes("CWE-134"), "sink inside a switch")

# --------------------------------------------------------------------------- CWE-120

subject("s12_bof_strcpy_param", "CWE-120", True, [fn("s12_main", [], r'''
int s12_main(void)
{
  char line [256];

  gets(line); /*SRC*/
  s12_copy_name(line);
  return 0;
}
'''), fn("s12_copy_name", [("char *", "param_1")], r'''
void s12_copy_name(char *param_1)
{
  char name [16];

  strcpy(name,param_1); /*SNK*/
  puts(name);
  return;
}
''')], ["gets", "strcpy", "puts"], [["s12_main", "s12_copy_name"]], yes("CWE-120"), "unbounded copy into a small buffer")

subject("s13_bof_memcpy_len", "CWE-120", True, [fn("s13_handle", [("int", "s")], r'''
void s13_handle(int s)
{
  uint len;
  char dst [64];

  recv(s,&len,4,0); /*SRC*/
  memcpy(dst,g_payload,len); /*SNK*/
  s13_use(dst);
  return;
}
'''), fn("s13_use", [("char *", "p")], r'''
void s13_use(char *p)
{
  puts(p);
  return;
}
''')], ["recv", "memcpy", "puts"], [["s13_handle"]], yes("CWE-120"), "tainted length through an address-of buffer")

subject("s14_bof_sprintf_env", "CWE-120", True, [fn("s14_main", [], r'''
int s14_main(void)
{
  char *home;
  char path [64];

  home = getenv("HOME"); /*SRC*/
  sprintf(path,"%s/.config/app.rc",home); /*SNK*/
  puts(path);
  return 0;
}
''')], ["getenv", "sprintf", "puts"], [["s14_main"]], yes("CWE-120"), "environment variable formatted into a fixed buffer")

subject("s15_bof_strcat_chain", "CWE-120", True, [fn("s15_a", [], r'''
void s15_a(void)
{
  char in [512];

  fgets(in,0x200,stdin); /*SRC*/
  s15_b(in);
  return;
}
'''), fn("s15_b", [("char *", "p")], r'''
void s15_b(char *p)
{
  char *q;

  q = p;
  s15_c(0,q);
  return;
}
'''), fn("s15_c", [("int", "flags"), ("char *", "text")], r'''
void s15_c(int flags,char *text)
{
  s15_d(text,flags);
  return;
}
'''), fn("s15_d", [("char *", "r"), ("int", "mode")], r'''
void s15_d(char *r,int mode)
{
  char buf [32];

  strcpy(buf,"prefix:");
  strcat(buf,r); /*SNK*/
  puts(buf);
  return;
}
''')], ["fgets", "strcpy", "strcat", "puts"], [["s15_a", "s15_b", "s15_c", "s15_d"]], yes("CWE-120"),
        "four-function chain, argument reordering")

subject("s16_bof_ptr_alias", "CWE-120", True, [fn("s16_main", [], r'''
int s16_main(void)
{
  char tmp [256];
  char dst [32];
  char *p;
  ssize_t n;

  n = read(0,tmp,0xff); /*SRC*/
  p = tmp;
  if (n < 1) {
    return 1;
  }
  *(p + n) = '\0';
  strcpy(dst,p); /*SNK*/
  puts(dst);
  return 0;
}
''')], ["read", "strcpy", "puts"], [["s16_main"]], yes("CWE-120"), "pointer alias of the read buffer")

# --------------------------------------------------------------------------- CWE-190

subject("s17_int_add", "CWE-190", True, [fn("s17_main", [], r'''
void s17_main(void)
{
  char data;
  char result;

  data = 0;
  fscanf(stdin,"%c",&data); /*SRC*/
  result = data + 1;
  printf("%d\n",(int)result); /*SNK*/
  return;
}
''')], ["fscanf", "printf"], [["s17_main"]], yes("CWE-190"), "char addition")

subject("s18_int_mult_chain", "CWE-190", True, [fn("s18_main", [], r'''
int s18_main(void)
{
  char buf [32];
  int data;

  fgets(buf,0x20,stdin); /*SRC*/
  data = atoi(buf);
  s18_scale(data);
  return 0;
}
'''), fn("s18_scale", [("int", "param_1")], r'''
void s18_scale(int param_1)
{
  printf("%d\n",param_1 * 2); /*SNK*/
  return;
}
''')], ["fgets", "atoi", "printf"], [["s18_main", "s18_scale"]], yes("CWE-190"), "multiplication in the sink argument")

subject("s19_int_ternary", "CWE-190", True, [fn("s19_handle", [("int", "s")], r'''
void s19_handle(int s)
{
  char buf [8];
  int n;
  int m;

  recv(s,buf,8,0); /*SRC*/
  n = (int)buf[0];
  m = 0 < n ? n * 100000 : 0;
  printf("%d\n",m); /*SNK*/
  return;
}
''')], ["recv", "printf"], [["s19_handle"]], "The code does not contain a vulnerability; the product stays in range.",
        "answered no (counts FN)")

subject("s20_int_dowhile", "CWE-190", True, [fn("s20_main", [], r'''
int s20_main(void)
{
  int count;
  int total;

  total = 0;
  fscanf(stdin,"%d",&count); /*SRC*/
  do {
    total = total + count;
  } while (total < 1000);
  printf("%d\n",total); /*SNK*/
  return 0;
}
''')], ["fscanf", "printf"], [["s20_main"]], yes("CWE-190"), "accumulation in a do/while loop")

# --------------------------------------------------------------------------- benign controls

subject("b01_cmd_constant", "CWE-78", False, [fn("b01_main", [], r'''
int b01_main(void)
{
  char buf [64];

  fgets(buf,0x40,stdin);
  puts(buf);
  system("ls -l");
  return 0;
}
''')], ["fgets", "puts", "system"], [], NO, "constant command; no flow")

subject("b02_cmd_allowlist", "CWE-78", False, [fn("b02_main", [], r'''
int b02_main(void)
{
  char buf [64];
  int iVar1;

  fgets(buf,0x40,stdin);
  iVar1 = strcmp(buf,"status");
  if (iVar1 == 0) {
    system(buf);
  }
  return 0;
}
''')], ["fgets", "strcmp", "system"], [], NO, "allow-listed command")

subject("b03_fmt_constant", "CWE-134", False, [fn("b03_serve", [("int", "s")], r'''
void b03_serve(int s)
{
  char buf [128];

  recv(s,buf,0x7f,0);
  printf("%s\n",buf);
  return;
}
''')], ["recv", "printf"], [], "The format string is constant, so the code does not contain a format string vulnerability.",
        "constant format")

subject("b04_int_clamped", "CWE-190", False, [fn("b04_main", [], r'''
int b04_main(void)
{
  int data;
  int result;

  fscanf(stdin,"%d",&data);
  if (data < 0x7fffffff) {
    result = data + 1;
    printf("%d\n",result);
  }
  return 0;
}
''')], ["fscanf", "printf"], [], yes("CWE-190"), "bounds-checked; answered yes (counts FP)")


def call_edges(fid, body):
    out = []
    for i, line in enumerate(body.split("\n"), 1):
        if i == 1:
            continue
        for m in re.finditer(r"\b([A-Za-z_]\w*)\s*\(", line):
            if m.group(1) not in KEYWORDS:
                out.append({"caller": fid, "callee": m.group(1), "line": i})
    return out


def marker_line(body, marker):
    for i, line in enumerate(body.split("\n"), 1):
        if marker in line:
            return i
    return None


def build():
    labels, planted, rules = [], {}, []
    exports_dir = HERE / "exports"
    exports_dir.mkdir(exist_ok=True)
    for s in SUBJECTS:
        functions, edges = [], []
        src = snk = None
        for fid, params, body in s["funcs"]:
            if "/*SRC*/" in body:
                src = {"function": fid, "line": marker_line(body, "/*SRC*/")}
            if "/*SNK*/" in body:
                snk = {"function": fid, "line": marker_line(body, "/*SNK*/")}
            clean = body.replace(" /*SRC*/", "").replace(" /*SNK*/", "")
            functions.append({"id": fid, "name": fid,
                              "params": [{"name": n, "type": t} for t, n in params], "body": clean})
            if clean.count("{") == clean.count("}"):
                edges += call_edges(fid, clean)
        export = {"name": s["id"], "schema_version": 1, "functions": functions,
                  "imports": [{"name": n, "kind": "dynamic"} for n in s["imports"]], "call_edges": edges}
        (exports_dir / (s["id"] + ".json")).write_text(json.dumps(export, indent=2) + "\n")
        labels.append({"subject": s["id"], "cwe": s["cwe"], "vulnerable": s["vulnerable"]})
        if s["vulnerable"]:
            planted[s["id"]] = {"chains": s["planted"], "source": src, "sink": snk, "note": s["note"]}
        rules.append({"when_last_contains": "according to CWE",
                      "when_all_contains": [s["funcs"][0][0] + "("], "reply": s["verdict"]})
    (HERE / "labels.json").write_text(json.dumps(labels, indent=2) + "\n")
    (HERE / "planted.json").write_text(json.dumps(planted, indent=2) + "\n")
    mock = {"model": "mock-corpus", "rules": rules,
            "fallback": "Data flow noted."}
    (HERE / "mock.json").write_text(json.dumps(mock, indent=2) + "\n")


if __name__ == "__main__":
    build()
