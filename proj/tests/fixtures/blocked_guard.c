void (*on_event)(void);

void run_cmd(char *c)
{
    system(c);
}

void dispatch(int mode, char *c)
{
    if (mode == 2)
        run_cmd(c);
}

void handler(void)
{
    dispatch(1, "x");
}

void poll_events(void)
{
    on_event();
}
