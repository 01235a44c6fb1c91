int a_helper(int x);

static void init(void)
{
}

int main(void)
{
    init();
    return a_helper(2);
}
