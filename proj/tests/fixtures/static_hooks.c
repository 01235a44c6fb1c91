typedef void (*hook_t)(void);

static void registered(void)
{
}

static void hidden(void)
{
}

hook_t hook;

void install(void)
{
    hook = registered;
    hidden();
}

void fire(void)
{
    hook();
}
